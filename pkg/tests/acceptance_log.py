"""Collected one-line acceptance verdicts, printed at the end of the pytest run."""

LINES: list[str] = []


def record(number: int, passed: bool, seconds: float, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({seconds:.2f} s) {detail}"
    LINES.append(line)
    print(line)
    return line
