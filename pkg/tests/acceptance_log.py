"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
LINES: dict[int, str] = {}


def record(number: int, passed: bool, text: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}"
    LINES[number] = line
    print(line)
