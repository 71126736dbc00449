import json
import logging
from pathlib import Path
from typing import Callable, Optional

from gridohm.exceptions import InvalidRequestError
from gridohm.models.request import CommandResult, OutputFormat
from gridohm.models.results import CatalogEntry
from gridohm.services.catalog import builtin
from gridohm.services.verification import PROFILES, VerificationSuite
from gridohm.utils.formatting import render_csv, render_json, render_table

logger = logging.getLogger(__name__)

EXIT_FAILED = 1


def cmd_verify(
    profile: str = "default",
    only: Optional[str] = None,
    report_path: Optional[str] = None,
    output: OutputFormat = OutputFormat.TEXT,
    catalog: Callable[..., CatalogEntry] = builtin,
) -> CommandResult:
    """Run the reference-value suite; exit code 1 if any check does not pass"""
    if profile not in PROFILES:
        raise InvalidRequestError(f"unknown profile {profile!r}", {"profiles": sorted(PROFILES)})
    suite = VerificationSuite(profile=profile, catalog=catalog)
    if only is not None and only not in suite.groups:
        raise InvalidRequestError(f"unknown check group {only!r}", {"groups": suite.groups})

    report = suite.run(only=only)
    logger.info(f"Verification finished: {report.passed} passed, {report.failed} not passed")

    document = report.model_dump(mode="json", exclude={"started_at"})
    if report_path is not None:
        try:
            Path(report_path).write_text(
                json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
        except OSError as e:
            raise InvalidRequestError(f"cannot write report {report_path}: {e}", {"path": report_path})

    header = ["group", "name", "expected", "observed", "tolerance", "status"]
    rows = [
        [c.group, c.name, c.expected if c.expected is not None else "", c.observed if c.observed is not None else "",
         c.tolerance if c.tolerance is not None else "", c.status.value]
        for c in report.checks
    ]
    if output == OutputFormat.JSON:
        text = render_json({**document, "passed": report.passed, "failed": report.failed})
    elif output == OutputFormat.CSV:
        text = render_csv(header, rows)
    else:
        text = render_table(header, rows) + f"\n\n{report.passed} passed, {report.failed} not passed"
    return CommandResult(output=text, exit_code=0 if report.ok else EXIT_FAILED)
