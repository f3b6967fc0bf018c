"""
Smoke test: settings load and the hard instance matches its closed forms.
Run from project root:
    python -m scripts.smoke_worstcase
"""
import sys
from pathlib import Path

# Ensure src is importable
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from imitlab.core.config import settings
from imitlab.services.worstcase import KAPPA, closed_forms, sweep


def main() -> None:
    print(f"threads           = {settings.threads}")
    print(f"log_level         = {settings.log_level}")
    print(f"verdict_tolerance = {settings.verdict_tolerance}")
    print(f"kappa             = {KAPPA:.9f}")

    for row in sweep([0.0, 0.5, 0.9, 0.99, 0.999]):
        forms = closed_forms(row.gamma)
        assert abs(row.v_e - forms.v_e) <= 1e-10, f"V_E mismatch at gamma={row.gamma}"
        assert abs(row.v_i - forms.v_i) <= 1e-10, f"V_I mismatch at gamma={row.gamma}"
        assert row.thm1_rhs >= row.gap, f"THM1 fails at gamma={row.gamma}"
        print(f"gamma={row.gamma:<6} gap={row.gap:.6f} ratio={row.ratio:.6f} ✓")


if __name__ == "__main__":
    main()
