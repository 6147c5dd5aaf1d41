"""Collects one line per acceptance criterion for the terminal summary."""

RESULTS = {}


def record(number: int, title: str, passed: bool, detail: str) -> None:
    RESULTS[number] = (title, passed, detail)
    print(line(number))


def line(number: int) -> str:
    title, passed, detail = RESULTS[number]
    return f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
