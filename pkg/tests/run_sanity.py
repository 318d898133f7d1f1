# tests/run_sanity.py
import pathlib
import unittest

if __name__ == "__main__":
    here = pathlib.Path(__file__).resolve().parent
    suite = unittest.defaultTestLoader.discover(str(here), pattern="test_*.py", top_level_dir=str(here.parent))
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)
    # non-zero exit on any failure, for CI and hooks
    raise SystemExit(0 if result.wasSuccessful() else 1)
