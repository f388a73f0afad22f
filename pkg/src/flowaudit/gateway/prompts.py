"""Prompt templates for function analysis and path-feasibility validation."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

from ..bugspec import BugType, ProgramValue, bug_type
from ..errors import EmptyCandidate, ValueOutsideFunction
from ..frontend import FunctionRecord


class TemplateKind(enum.Enum):
    FUNCTION_ANALYSIS = "FunctionAnalysis"
    FEASIBILITY_VALIDATION = "FeasibilityValidation"


@dataclass(frozen=True)
class Decoding:
    temperature: float = 0.0
    max_output_tokens: int = 4096

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature must lie in [0, 1], got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class PromptRequest:
    template: TemplateKind
    rendered_text: str
    decoding: Decoding = Decoding()
    function_id: str = ""
    value_key: str = ""
    attempt: int = 0
    bug: str = ""

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.template, self.bug, self.function_id, self.value_key, self.attempt)

    def retry(self, note: str) -> "PromptRequest":
        """The same request re-asked after a malformed answer."""
        return PromptRequest(
            self.template,
            f"{self.rendered_text}\n\n## Correction\n{note}\n",
            self.decoding,
            self.function_id,
            self.value_key,
            self.attempt + 1,
            self.bug,
        )


def value_key(variable: str, file: str, line: int) -> str:
    return f"{variable}@{file}:{line}"


def fingerprint(template: TemplateKind, bug: str, function_id: str, key: str, attempt: int = 0) -> str:
    material = f"{template.value}\0{bug}\0{function_id}\0{key}"
    if attempt:
        material += f"\0retry{attempt}"
    return hashlib.sha256(material.encode()).hexdigest()[:20]


def load_few_shots(bug) -> list[str]:
    text = resources.files("flowaudit").joinpath(f"data/fewshots/{bug_type(bug).key}.txt").read_text()
    return [text.strip()]


TASK = """\
## Task
You are auditing one C function for {bug_name} bugs: {source} may flow to {sink}.
Track how the value `{variable}` at line {line} propagates inside `{function}`.
Report, for every feasible program path, the data-flow facts starting from that value.
A fact `u@a -> v@b` means the value of `u` at line `a` may affect `v` at line `b`.
"""

STEP_POINTERS = """\
## Step 1: handle pointers
Decide which memory objects each pointer may refer to along each path. Treat
an assignment between pointers, or passing a pointer by address, as a
propagation of the value it holds. Dereferences (`*p`, `p->f`, `p[i]`) use
the pointer's value.
"""

STEP_ABSTRACTION = """\
## Step 2: abstract the function
Keep only the statements relevant to the tracked value: assignments that copy
it, conditions that guard those assignments, calls that receive it as an
argument, returns of it, and writes of it to globals. Drop everything else
before enumerating paths.
"""

STEP_PATHS = """\
## Step 3: explore feasible paths
Enumerate the program paths of the reduced function. Discard a path when its
branch conditions contradict each other. For every remaining path, follow the
tracked value statement by statement and record its facts, where it leaves
the function, and the branch conditions the path assumes.
"""

OUTPUT_FORMAT = """\
## Output format
Answer with one block per feasible path and nothing else that starts with these tags:
PATH <n>
STATEMENTS: <comma-separated line numbers in execution order>
FACT: <variable>@<line> -> <variable>@<line>   (one line per fact)
ESCAPE: RETURN <variable>@<line>               (value returned to the caller)
ESCAPE: ARGUMENT <variable>@<line> CALL <callee> INDEX <0-based position>
ESCAPE: GLOBAL <variable>@<line>               (value stored in a global)
CONDITION: <branch conditions assumed by this path>
END
If the value does not propagate at all, answer exactly: NO PATHS
"""


def render_analysis_prompt(
    function: FunctionRecord,
    value: ProgramValue,
    bug,
    few_shots: Optional[Sequence[str]] = None,
    *,
    abstraction: bool = True,
    decoding: Decoding = Decoding(),
) -> PromptRequest:
    """Render the per-function analysis prompt for ``value`` inside ``function``."""
    bug = bug_type(bug)
    if value.function != function.id or not function.contains_line(value.line):
        raise ValueOutsideFunction(f"{value} is not inside {function.name}")
    if few_shots is None:
        few_shots = load_few_shots(bug)
    what = f"`{value.variable}`"
    if value.receiver:
        what += f" (assigned to `{value.receiver}`)"
    parts = [
        TASK.format(
            bug_name=bug.name,
            source=bug.source_description,
            sink=bug.sink_description,
            variable=value.variable,
            line=value.line,
            function=function.name,
        ),
        STEP_POINTERS,
    ]
    if abstraction:
        parts.append(STEP_ABSTRACTION)
    parts.append(STEP_PATHS)
    parts.append("## Examples\n" + "\n\n".join(few_shots) + "\n")
    parts.append(
        f"## Question\nFunction `{function.name}` from {function.file}:\n"
        f"```c\n{function.numbered_source()}\n```\n"
        f"Starting from {what} at line {value.line}, which data-flow facts hold along "
        f"each feasible program path of `{function.name}`?\n"
    )
    parts.append(OUTPUT_FORMAT)
    return PromptRequest(
        TemplateKind.FUNCTION_ANALYSIS,
        "\n".join(parts),
        decoding,
        function.id,
        value_key(value.variable, value.location.file, value.line),
        bug=bug.key,
    )


FEASIBILITY_TASK = """\
## Task
A chain of data-flow facts was assembled across functions for a potential {bug_name} bug
({source} reaching {sink}). Each segment below is one function, with the path taken
inside it and the branch conditions that path assumes. Check whether the conditions of
all segments can hold together for one execution. Look for contradictions, for example a
flag tested true in one function and false in another.
"""

FEASIBILITY_FORMAT = """\
## Answer format
The first line must be exactly one word: FEASIBLE or CONTRADICTION.
Then justify the verdict in a few sentences.
"""


def render_feasibility_prompt(candidate, inventory, *, decoding: Decoding = Decoding()) -> PromptRequest:
    """Render the cross-function feasibility prompt for an assembled bug candidate."""
    if not candidate.segments:
        raise EmptyCandidate("candidate has no function segments")
    bug = candidate.bug
    parts = [
        FEASIBILITY_TASK.format(bug_name=bug.name, source=bug.source_description, sink=bug.sink_description)
    ]
    for i, (fid, path) in enumerate(candidate.segments, 1):
        fn = inventory.get(fid)
        facts = [f for f in candidate.chain if f.boundary is None and f.src.function == fid]
        lines = ", ".join(str(s.line) for s in path.statements)
        parts.append(
            f"### Segment {i}: `{fn.name}` ({fn.file} lines {fn.span[0]}-{fn.span[1]})\n"
            f"```c\n{fn.numbered_source()}\n```\n"
            f"Path statements: {lines}\n"
            f"Facts: {'; '.join(str(f) for f in facts) or '(none)'}\n"
            f"Conditions: {path.condition_notes or '(none stated)'}\n"
        )
    links = [f for f in candidate.chain if f.boundary is not None]
    if links:
        parts.append("### Links between segments\n" + "\n".join(
            f"- {f.src} in `{inventory.get(f.src.function).name}` "
            f"{'is returned to' if f.boundary.value == 'return' else 'is passed as'} "
            f"{f.dst} in `{inventory.get(f.dst.function).name}`"
            for f in links
        ) + "\n")
    end = candidate.terminal_description()
    parts.append(f"### Outcome\n{end}\n")
    parts.append(FEASIBILITY_FORMAT)
    return PromptRequest(
        TemplateKind.FEASIBILITY_VALIDATION,
        "\n".join(parts),
        decoding,
        candidate.source.function,
        candidate.chain_key(),
        bug=bug.key,
    )
