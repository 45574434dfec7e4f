#!/usr/bin/env python3
"""
Run script for GridShield
This script starts the API server or runs a sample scenario.
"""

import subprocess
import sys
import os
from pathlib import Path


def venv_python():
    """Python interpreter of the project virtual environment, if there is one."""
    project_root = Path(__file__).parent.absolute()
    venv_path = project_root / ".venv"

    if sys.platform == "win32":
        python_path = venv_path / "Scripts" / "python.exe"
    else:
        python_path = venv_path / "bin" / "python"
    return python_path if python_path.exists() else Path(sys.executable)


def run_server():
    """Run the FastAPI server."""
    project_root = Path(__file__).parent.absolute()
    os.chdir(project_root)

    print("🚀 Starting GridShield API on http://localhost:8000")
    try:
        subprocess.run([
            str(venv_python()), "-m", "uvicorn",
            "gridshield.main:app", "--reload", "--port", "8000"
        ], check=True)
    except KeyboardInterrupt:
        print("\n🛑 API server stopped")
    except subprocess.CalledProcessError as e:
        print(f"❌ Error starting API server: {e}")


def run_scenario(name, runs=None):
    """Run one of the sample scenarios through the command line tool."""
    project_root = Path(__file__).parent.absolute()
    config = project_root / "scenarios" / f"{name}.json"
    if not config.exists():
        print(f"❌ Scenario {config} not found!")
        return 1

    out = project_root / "results" / f"{name}.csv"
    command = [str(venv_python()), "-m", "gridshield", "--log-level", "INFO", "simulate", "--config", str(config), "--out", str(out)]
    if runs:
        command += ["--runs", str(runs)]

    print(f"📈 Running scenario '{name}' -> {out}")
    return subprocess.run(command).returncode


def main():
    """Main function to handle command line arguments."""
    if len(sys.argv) > 1:
        if sys.argv[1] == "server":
            run_server()
        elif sys.argv[1] == "scenario":
            if len(sys.argv) < 3:
                print("❌ Missing scenario name (clean, random, specific_sensor, targeted)")
                sys.exit(1)
            runs = int(sys.argv[3]) if len(sys.argv) > 3 else None
            sys.exit(run_scenario(sys.argv[2], runs))
        elif sys.argv[1] == "help" or sys.argv[1] == "-h":
            print("Usage:")
            print("  python3 run.py                        # Start the API server")
            print("  python3 run.py server                 # Start the API server")
            print("  python3 run.py scenario NAME [RUNS]   # Run scenarios/NAME.json")
            print("  python3 run.py help                   # Show this help message")
        else:
            print(f"❌ Unknown command: {sys.argv[1]}")
            print("Use 'python3 run.py help' for usage information")
    else:
        run_server()


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print("\n👋 Goodbye!")
        sys.exit(0)
