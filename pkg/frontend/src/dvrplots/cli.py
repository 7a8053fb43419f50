"""Command-line entry point: ``plots <figure-spec-file>``.

Exit codes: 0 on success, 1 for invalid specs or input CSVs, 2 for
unexpected rendering failures.
"""

from __future__ import annotations

import sys

from .figure import PlotSpecError, load_spec, render

USAGE = "usage: plots <figure-spec-file>"


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    if len(argv) != 1 or argv[0] in ("-h", "--help"):
        stream = sys.stdout if argv and argv[0] in ("-h", "--help") else sys.stderr
        print(USAGE, file=stream)
        return 0 if argv and argv[0] in ("-h", "--help") else 1
    try:
        spec = load_spec(argv[0])
        out = render(spec)
    except PlotSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


def entry():
    raise SystemExit(main())
