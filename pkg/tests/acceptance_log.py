"""One summary line per acceptance criterion, printed at the end of the session."""
LINES = []


def report(tag, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {tag}: {detail}"
    LINES.append(line)
    print(line)
    return ok


def skip(tag, detail):
    LINES.append(f"SKIP  criterion {tag}: {detail}")
