import re

ACCEPTANCE = {}


def _order(label):
    num, suffix = re.fullmatch(r"(\d+)(\w*)", str(label)).groups()
    return int(num), suffix


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE, key=_order):
        status, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {str(num):>3} {status}: {title} ({detail})")
