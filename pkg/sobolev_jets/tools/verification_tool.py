"""
Verification Tool
Full invariant suite report for one jet field
"""

from pathlib import Path
from typing import Any, Dict

from ..core.jets import JetField
from ..flows.verification_flow import run_verification
from ..settings import Settings
from .report_tool import envelope, write_report


def verify_tool(field: JetField, settings: Settings, output_dir: Path, seed: int = 0) -> Dict[str, Any]:
    verdict = run_verification(field, settings, seed)
    result = envelope(
        command="verify",
        seed=seed,
        instance={"dim": field.dim, "m": field.m, "p": field.p, "points": field.size},
        passed=verdict["passed"],
        suites=verdict["suites"],
        timings=verdict["timings"],
    )
    write_report(result, output_dir / "verify.json")
    return result
