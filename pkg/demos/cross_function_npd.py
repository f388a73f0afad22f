"""A NULL that survives one call and is dereferenced by the caller.

field2json() starts with ``json = NULL`` and, when ``repeated`` is false,
returns it untouched.  parse_msg() dereferences whatever comes back.  The
demo writes the two files, scripts what a model would answer for each
function, and runs the audit with the offline mock backend.

    python3 demos/cross_function_npd.py
"""

import tempfile
from pathlib import Path

from flowaudit import AuditConfig, index_repository, run_audit
from flowaudit.gateway import MockScript
from flowaudit.report import to_text

FIELD_JSON = """\
struct json_value *field2json(struct message *msg, struct field *field, int repeated)
{
    int type = field->type;
    struct json_value *json = NULL;
    if (repeated) {
        json = json_new_array(field);
    }
    switch (type) {
    case FIELD_INT: msg->ints++; break;
    case FIELD_STR: msg->strs++; break;
    default: break;
    }
    if (!repeated) {
        return json;
    }
    if (json_fill_array(json, msg, field) < 0)
        return json_error(field);
    return json;
}
"""

PARSE_MSG = """\
int parse_msg(struct message *msg, struct field *field)
{
    int repeated = field->label == LABEL_REPEATED;
    if (msg == NULL)
        return -1;
    log_field(field);
    struct json_value *field_json = field2json(msg, field, repeated);
    field_json->kind = JSON_FIELD;
    return json_attach(msg, field_json);
}
"""

# What the model is expected to say about NULL@4 inside field2json.
CALLEE_ANSWER = """\
PATH 1
STATEMENTS: 4, 5, 13, 14
FACT: NULL@4 -> json@4
FACT: json@4 -> json@14
ESCAPE: RETURN json@14
CONDITION: repeated == false
END
PATH 2
STATEMENTS: 4, 5, 6, 13, 16, 18
FACT: NULL@4 -> json@4
CONDITION: repeated == true
END
"""

CALLER_ANSWER = """\
PATH 1
STATEMENTS: 7, 8, 9
FACT: field_json@7 -> field_json@8
CONDITION: msg != NULL
END
"""

CHAIN = ("NULL@src/field_json.c:4 -> json@src/field_json.c:4 -> json@src/field_json.c:14"
         " -> field_json@src/parse_msg.c:7 -> field_json@src/parse_msg.c:8")


def build(root: Path, mock: Path) -> None:
    (root / "src").mkdir(parents=True)
    (root / "src" / "field_json.c").write_text(FIELD_JSON)
    (root / "src" / "parse_msg.c").write_text(PARSE_MSG)
    inv = index_repository(root)
    (f2j,) = inv.by_name("field2json")
    (pm,) = inv.by_name("parse_msg")
    script = MockScript(mock)
    script.analysis("npd", f2j.id, "NULL", f2j.file, 4, CALLEE_ANSWER, 1200, 180)
    script.analysis("npd", pm.id, "field_json", pm.file, 7, CALLER_ANSWER, 700, 60)
    script.feasibility("npd", f2j.id, CHAIN, "FEASIBLE\nrepeated and msg are unrelated.", 900, 40)


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        root, mock = Path(tmp) / "repo", Path(tmp) / "mock"
        build(root, mock)
        reports, ledger = run_audit(AuditConfig(str(root), mock_dir=str(mock)))
        print(to_text(reports, ledger))
        for report in reports:
            print("functions on the chain:", " -> ".join(s.name for s in report.segments))
            print("feasibility:", report.feasibility)


if __name__ == "__main__":
    main()
