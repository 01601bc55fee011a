"""Optional gnuplot script emission; no in-process rendering."""

from __future__ import annotations

from .errors import ValidationError

_TEMPLATES = {
    "bloch": (
        "set datafile separator ','\n"
        "set logscale xy\n"
        "set xlabel 'pulse time (ns)'; set ylabel 'double-excitation error'\n"
        "plot '{csv}' skip 3 using 1:2 with linespoints notitle\n"
    ),
    "tradeoff": (
        "set datafile separator ','\n"
        "set xlabel 'solid angle (sr)'; set ylabel 'mixing error'\n"
        "plot '{csv}' skip 3 using 1:3 with lines notitle\n"
    ),
    "histogram": (
        "set datafile separator ','\n"
        "set xlabel 'delay (ps)'; set ylabel 'coincidences'\n"
        "plot '{csv}' skip 3 using 1:2 with impulses notitle\n"
    ),
    "scan": (
        "set datafile separator ','\n"
        "set xlabel 'window (ns)'; set ylabel 'g2(0)'; set y2label 'collected fraction'\n"
        "set y2tics\n"
        "plot '{csv}' skip 3 using 1:2 with linespoints axes x1y1 title 'g2', \\\n"
        "     '{csv}' skip 3 using 1:4 with linespoints axes x1y2 title 'fraction'\n"
    ),
    "fringe": (
        "set datafile separator ','\n"
        "set xlabel 'setting (rad)'; set ylabel 'P(up)'\n"
        "plot '{csv}' skip 3 using 1:2 with linespoints title 'APD1', \\\n"
        "     '{csv}' skip 3 using 1:3 with linespoints title 'APD2'\n"
    ),
}


def gnuplot_script(kind: str, csv_name: str) -> str:
    if kind not in _TEMPLATES:
        raise ValidationError(f"no plot template for {kind!r}")
    return _TEMPLATES[kind].format(csv=csv_name)
