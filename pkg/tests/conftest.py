import sys
from pathlib import Path

from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

# fixed example generation so every run of the suite sees the same cases
settings.register_profile("repro", derandomize=True, print_blob=True)
# random exploration: pytest --hypothesis-profile=explore --hypothesis-seed=N
settings.register_profile("explore", derandomize=False, database=None, print_blob=True)
settings.load_profile("repro")


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    verdicts = getattr(acceptance, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for k in sorted(verdicts):
            terminalreporter.write_line(verdicts[k])
