"""Per-criterion outcomes of the acceptance suite, printed at session end."""

RESULTS: dict[int, list[tuple[str, bool, str]]] = {}

TITLES = {
    1: "exactness anchors",
    2: "solver contraction",
    3: "uniqueness",
    4: "holomorphy",
    5: "estimate suite",
    6: "nodal extension",
    7: "combinatorics goldens",
    8: "degeneration demo",
    9: "annulus law",
}


def record(criterion: int, part: str, ok: bool, detail: str = "") -> bool:
    RESULTS.setdefault(criterion, []).append((part, bool(ok), detail))
    return ok


def summary_lines() -> list[str]:
    lines = []
    for k in sorted(RESULTS):
        parts = RESULTS[k]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        info = "; ".join(f"{p}{'' if ok else ' FAILED'}: {d}" if d else f"{p}{'' if ok else ' FAILED'}" for p, ok, d in parts)
        lines.append(f"criterion {k} ({TITLES[k]}): {status}  [{info}]")
    return lines
