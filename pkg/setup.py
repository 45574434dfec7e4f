#!/usr/bin/env python3
"""
Setup script for GridShield
Creates the virtual environment, installs dependencies, checks the bundled model
and writes the sample scenarios.
"""

import subprocess
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.absolute()
VENV = PROJECT_ROOT / ".venv"
BIN = VENV / ("Scripts" if sys.platform == "win32" else "bin")
PYTHON = BIN / ("python.exe" if sys.platform == "win32" else "python")
CORE_DEPENDENCIES = ["numpy", "scipy", "pydantic", "fastapi", "uvicorn"]


def step(description, *argv):
    """Run one setup step; abort the setup with the tool's stderr if it fails."""
    print(f"⏳ {description}...")
    done = subprocess.run([str(a) for a in argv], cwd=PROJECT_ROOT, capture_output=True, text=True)
    if done.returncode:
        sys.exit(f"❌ {description} failed (exit {done.returncode}):\n{done.stderr}")
    print(f"✅ {description}")


def main():
    print("🚀 Setting up GridShield")
    print("=" * 50)

    if VENV.exists():
        print("✅ Virtual environment already exists")
    else:
        step("Creating virtual environment", sys.executable, "-m", "venv", VENV)

    step("Upgrading pip", PYTHON, "-m", "pip", "install", "--upgrade", "pip")
    if (PROJECT_ROOT / "requirements.txt").exists():
        step("Installing Python dependencies", PYTHON, "-m", "pip", "install", "-r", "requirements.txt")
    else:
        step("Installing core dependencies", PYTHON, "-m", "pip", "install", *CORE_DEPENDENCIES)

    step("Validating bundled model", PYTHON, "-m", "gridshield", "validate", "--model", "bundled:ieee14_surrogate")
    if not any((PROJECT_ROOT / "scenarios").glob("*.json")):
        step("Writing sample scenarios", PYTHON, "-m", "gridshield.bundled")

    print("\n🎉 Setup completed successfully!")
    print("\nNext steps:")
    print(f"1. {PYTHON} -m gridshield simulate --config scenarios/targeted.json --runs 5 --out results/targeted.csv")
    print(f"2. {PYTHON} -m gridshield bench --p 10,25,50 --out results/runtime.csv")
    print(f"3. {PYTHON} -m uvicorn gridshield.main:app --reload --port 8000  (docs at http://localhost:8000/docs)")
    print("4. Or use the run script: python3 run.py")


if __name__ == "__main__":
    main()
