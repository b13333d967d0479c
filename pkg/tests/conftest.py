import _criteria


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criteria.LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in _criteria.LINES:
            terminalreporter.write_line(line)
