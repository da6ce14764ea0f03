"""Bundled demo processes with canned step outputs for the replay provider.

Each case carries a process description plus the recorded answers for every
step the pipeline asks about it. `write_replay_dir` renders the real prompts
and stores the canned answers under their digests, producing a directory the
replay provider can serve without any network access.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .abstraction import apply_abstraction, find_repetition_segments, table_from_entries
from .llm_gateway import record_replay, render_prompt
from .relations import normalize_activities

__all__ = ["DemoCase", "DEMO_CASES", "demo_case", "write_replay_dir"]


@dataclass(frozen=True)
class DemoCase:
    name: str
    description: str
    paths: list[list[str]]
    concurrency: list[list[str]] = field(default_factory=list)
    loops: list[list[str]] = field(default_factory=list)
    abstraction: list[dict] | None = None  # {label, variants} records


CAR = DemoCase(
    name="car",
    description=(
        "The customer decides if he wants to finance or pay in cash. If the "
        "customer chooses to finance, two activities will happen in "
        "parallel: the customer will fill out a loan application, and the "
        "manager will check the customer's info. If the customer chooses to "
        "pay in cash, the customer will need to bring the total amount to "
        "the dealership in order to complete the transaction."
    ),
    paths=[
        ["Decide Payment Method", "Bring Total Amount", "Complete Cash Transaction"],
        [
            "Decide Payment Method",
            "Fill Out Loan Application",
            "Check Customer Information",
            "Complete Financed Transaction",
        ],
        [
            "Decide Payment Method",
            "Check Customer Information",
            "Fill Out Loan Application",
            "Complete Financed Transaction",
        ],
    ],
    concurrency=[["Fill Out Loan Application", "Check Customer Information"]],
)

BICYCLE = DemoCase(
    name="bicycle",
    description=(
        "A small company manufactures customized bicycles. Whenever the "
        "sales department receives an order, a new process instance is "
        "created. A member of the sales department can then reject or "
        "accept the order for a customized bike. In the former case, the "
        "process instance is finished. In the latter case, the storehouse "
        "and the engineering department are informed. The storehouse "
        "immediately processes the part list of the order and checks the "
        "required quantity of each part. If the part is available in-house, "
        "it is reserved. If it is not available, it is back-ordered. This "
        "procedure is repeated for each item on the part list. In the "
        "meantime, the engineering department prepares everything for the "
        "assembling of the ordered bicycle. If the storehouse has "
        "successfully reserved or back-ordered every item of the part list "
        "and the preparation activity has finished, the engineering "
        "department assembles the bicycle. Afterwards, the sales department "
        "ships the bicycle to the customer and finishes the process "
        "instance."
    ),
    paths=[
        ["Receive Order", "Reject Order"],
        [
            "Receive Order",
            "Accept Order",
            "Inform Storehouse",
            "Inform Engineering",
            "Process Part List",
            "Reserve Parts",
            "Complete Preparation",
            "Assemble Bicycle",
            "Ship Bicycle",
        ],
        [
            "Receive Order",
            "Accept Order",
            "Inform Storehouse",
            "Inform Engineering",
            "Process Part List",
            "Backorder Parts",
            "Complete Preparation",
            "Assemble Bicycle",
            "Ship Bicycle",
        ],
    ],
    concurrency=[
        ["Inform Storehouse", "Inform Engineering"],
        ["Process Part List", "Complete Preparation"],
        ["Reserve Parts", "Complete Preparation"],
        ["Backorder Parts", "Complete Preparation"],
    ],
    loops=[["Process Part List", "Reserve Parts", "Backorder Parts"]],
)

EXAM = DemoCase(
    name="exam",
    description=(
        "The process begins when the student logs in to the university's "
        "website. He then takes an online exam. After that, the system "
        "grades it. If the student scores below 60%, he takes the exam "
        "again. If the student scores 60% or higher on the exam, the "
        "professor enters the grade."
    ),
    paths=[
        ["Log Into University Website", "Complete Online Exam", "Grade Exam", "Register Grade"],
        [
            "Log Into University Website",
            "Complete Online Exam",
            "Grade Exam",
            "Complete Retake Exam",
            "Grade Retake Exam",
            "Register Grade",
        ],
    ],
    loops=[["Complete Retake Exam", "Grade Retake Exam"]],
)

COMPUTER = DemoCase(
    name="computer",
    description=(
        "A customer brings in a defective computer and the CRS checks the "
        "defect and hands out a repair cost calculation back. If the "
        "customer decides that the costs are acceptable, the process "
        "continues, otherwise she takes her computer home unrepaired. The "
        "ongoing repair consists of two activities, which are executed, in "
        "an arbitrary order. The first activity is to check and repair the "
        "hardware, whereas the second activity checks and configures the "
        "software. After each of these activities, the proper system "
        "functionality is tested. If an error is detected another arbitrary "
        "repair activity is executed, otherwise the repair is finished."
    ),
    paths=[
        [
            "Receive Defective Computer",
            "Assess Computer Defect",
            "Provide Cost Calculation",
            "Return Computer Unrepaired",
        ],
        [
            "Receive Defective Computer",
            "Assess Computer Defect",
            "Provide Cost Calculation",
            "Check Hardware",
            "Repair Hardware",
            "Test System Functionality",
            "Check Software",
            "Configure Software",
            "Test System Functionality",
        ],
        [
            "Receive Defective Computer",
            "Assess Computer Defect",
            "Provide Cost Calculation",
            "Check Software",
            "Configure Software",
            "Test System Functionality",
            "Check Hardware",
            "Repair Hardware",
            "Test System Functionality",
        ],
    ],
    abstraction=[
        {
            "label": "Repair Hardware Defect",
            "variants": [["Check Hardware", "Repair Hardware", "Test System Functionality"]],
        },
        {
            "label": "Fix Software Configuration",
            "variants": [["Check Software", "Configure Software", "Test System Functionality"]],
        },
    ],
)

CLAIM = DemoCase(
    name="claim",
    description=(
        "An employee submits an expense report. The finance clerk checks "
        "the receipts and, at the same time, the team lead reviews the "
        "business justification. If the claim is approved, the accountant "
        "transfers the reimbursement and the clerk archives the file. If "
        "the claim is rejected, the employee is notified."
    ),
    paths=[
        [
            "Submit Expense Report",
            "Check Receipts",
            "Review Justification",
            "Transfer Reimbursement",
            "Archive File",
        ],
        [
            "Submit Expense Report",
            "Review Justification",
            "Check Receipts",
            "Transfer Reimbursement",
            "Archive File",
        ],
        ["Submit Expense Report", "Check Receipts", "Review Justification", "Notify Employee"],
        ["Submit Expense Report", "Review Justification", "Check Receipts", "Notify Employee"],
    ],
    concurrency=[["Check Receipts", "Review Justification"]],
)

DEMO_CASES = {case.name: case for case in (CAR, BICYCLE, EXAM, COMPUTER, CLAIM)}


def demo_case(name: str) -> DemoCase:
    return DEMO_CASES[name]


def _fenced(value) -> str:
    return "```json\n" + json.dumps(value, indent=2) + "\n```"


def _response(intro: str, value) -> str:
    return f"{intro}\n\n{_fenced(value)}\n"


def write_replay_dir(case: DemoCase, directory: str | Path) -> Path:
    """Record every exchange the pipeline will ask for on this case."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "description.txt").write_text(case.description + "\n", encoding="utf-8")

    prompt = render_prompt("paths", case.description)
    record_replay(directory, prompt, _response("These are the execution paths:", case.paths))

    label_paths = case.paths
    if case.abstraction is not None:
        groups = find_repetition_segments(label_paths)
        segments = [list(v) for g in groups for v in g.variants()]
        prompt = render_prompt("abstraction", case.description, segments=segments)
        record_replay(
            directory,
            prompt,
            _response(
                "Each group of equivalent segments folds into one abstract activity:",
                {"entries": case.abstraction},
            ),
        )
        existing = {label for p in label_paths for label in p}
        table = table_from_entries(case.abstraction, existing)
        label_paths = apply_abstraction(label_paths, table)

    labels = normalize_activities(label_paths).labels()
    prompt = render_prompt("concurrency", case.description, labels)
    record_replay(
        directory,
        prompt,
        _response("These activity pairs can run concurrently:", case.concurrency),
    )
    prompt = render_prompt("loops", case.description, labels)
    record_replay(
        directory,
        prompt,
        _response("These activity sets occur within loops:", case.loops),
    )
    return directory
