"""GridShield test suite."""
