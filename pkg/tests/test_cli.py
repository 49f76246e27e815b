import csv
import io
import json

import jsonschema
import pytest

from koethe_lab.cli import main, suite_document
from koethe_lab.instance import InstanceError, parse_document, parse_instance
from koethe_lab.report import REPORT_SCHEMA, Report, emit_report, from_json
from koethe_lab.runner import run_tasks

FAST = {"N": 300, "kmax": 3, "mmax": 8}


def doc(tasks, spaces=None, sequences=None, budget=FAST):
    return {
        "schema": "koethe-lab/instance/v1",
        "budget": budget,
        "spaces": spaces if spaces is not None else {
            "A": {"class": "infinite", "alpha": {"form": "log"}},
            "B": {"class": "finite", "alpha": {"form": "linear", "c": 1}},
        },
        "sequences": sequences if sequences is not None else {
            "ones": {"form": "constant"},
            "big": {"form": "expexp", "s": 1, "alpha": {"form": "powerlog", "p": 2}},
            "e1": [1.0],
        },
        "tasks": tasks,
    }


def write(tmp_path, d, name="inst.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


# --- parsing ---------------------------------------------------------------


def test_minimal_file_parses(tmp_path):
    p = write(tmp_path, doc([{"op": "nuclear", "space": "A"}], sequences={}))
    inst = parse_instance(p)
    assert [t.op for t in inst.tasks] == ["nuclear"]
    assert inst.tasks[0].id == "1:nuclear"


def test_dangling_reference_names_it(tmp_path):
    p = write(tmp_path, doc([{"op": "nuclear", "space": "X"}]))
    with pytest.raises(InstanceError, match="'X'"):
        parse_instance(p)


def test_zero_budget_rejected(tmp_path):
    p = write(tmp_path, doc([], budget={"N": 0}))
    with pytest.raises(InstanceError, match="budget/N"):
        parse_instance(p)


def test_parse_error_has_line_and_column(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "schema": "koethe-lab/instance/v1",\n  "tasks": [,]\n}\n')
    with pytest.raises(InstanceError, match=r"broken.json:3:\d+"):
        parse_instance(p)


@pytest.mark.parametrize(
    "mutate,pattern",
    [
        (lambda d: d["spaces"].update(C={"class": "hyperbolic"}), "unknown space class"),
        (lambda d: d["tasks"].append({"op": "inclusion", "source": "A"}), "needs 'target'"),
        (lambda d: d["tasks"].append({"op": "frobnicate"}), "frobnicate"),
        (lambda d: d.update(schema="v0"), "schema"),
        (lambda d: d["tasks"].extend([{"op": "nuclear", "space": "A", "id": "t"}] * 2), "unique"),
    ],
)
def test_validation_errors(mutate, pattern):
    d = doc([])
    mutate(d)
    with pytest.raises(InstanceError, match=pattern):
        parse_document(d)


# --- running ---------------------------------------------------------------


def test_convolve_task():
    inst = parse_document(doc([{"op": "convolve", "sequence": "ones", "x": "ones", "N": 5}]))
    rep = run_tasks(inst)
    assert [v.to_float() for v in rep.tasks[0].values] == pytest.approx([1, 2, 3, 4, 5], rel=1e-14)
    assert rep.exit_code() == 0


def test_empty_task_list():
    rep = run_tasks(parse_document(doc([])))
    assert rep.tasks == [] and rep.exit_code() == 0


def test_task_errors_are_captured():
    d = doc([{"op": "nuclear", "space": "T"}, {"op": "nuclear", "space": "A"}],
            spaces={"T": {"class": "tabulated", "grid": [[1.0, 2.0]] * 5},
                    "A": {"class": "infinite", "alpha": {"form": "log"}}})
    d["tasks"].insert(0, {"op": "membership", "sequence": "ones", "space": "T"})
    rep = run_tasks(parse_document(d))
    assert rep.tasks[2].status == "Holds"
    assert rep.exit_code() == 2


@pytest.mark.parametrize("threads", [1, 4])
def test_declaration_order_kept(threads):
    tasks = [{"op": op, "space": "B", "id": f"t{i}"} for i, op in enumerate(["g1", "nuclear", "ginf", "axioms"])]
    rep = run_tasks(parse_document(doc(tasks)), threads=threads)
    assert [t.id for t in rep.tasks] == ["t0", "t1", "t2", "t3"]
    assert [t.status for t in rep.tasks] == ["Holds", "Holds", "Fails", "Holds"]


def test_every_op_runs():
    tasks = [
        {"op": "axioms", "space": "A"},
        {"op": "nuclear", "space": "A"},
        {"op": "g1", "space": "B"},
        {"op": "ginf", "space": "A", "normalize": True},
        {"op": "inclusion", "source": "A", "target": "B"},
        {"op": "membership", "sequence": "ones", "space": "B"},
        {"op": "dual", "sequence": "ones", "space": "A"},
        {"op": "certify", "source": "A", "target": "B", "sequence": "ones", "direction": "transpose"},
        {"op": "theorem1", "source": "A", "target": "B", "sequence": "ones"},
        {"op": "theorem2", "source": "A", "target": "B", "sequence": "e1"},
        {"op": "normality", "source": "A", "target": "B", "sequence": "e1", "dominant": "ones"},
        {"op": "convolve", "sequence": "e1", "x": "ones", "N": 3},
    ]
    rep = run_tasks(parse_document(doc(tasks)))
    assert [t.status for t in rep.tasks] == ["Holds"] * 11 + ["Computed"]
    assert rep.tasks[8].agreement == "Consistent"
    assert rep.exit_code() == 0


def test_failing_theorem_exit_code():
    rep = run_tasks(parse_document(doc([{"op": "theorem1", "source": "A", "target": "B", "sequence": "big"}])))
    assert rep.tasks[0].status == "Fails" and rep.tasks[0].agreement == "Consistent"
    # Consistent agreement on a Fails instance still reports success of the cross-check
    assert rep.exit_code() == 0
    rep = run_tasks(parse_document(doc([{"op": "membership", "sequence": "big", "space": "B"}])))
    assert rep.exit_code() == 2


# --- reports ---------------------------------------------------------------


@pytest.fixture(scope="module")
def small_report():
    tasks = [
        {"op": "theorem1", "source": "A", "target": "B", "sequence": "ones", "id": "F"},
        {"op": "theorem1", "source": "A", "target": "B", "sequence": "big", "id": "G"},
        {"op": "dual", "sequence": "ones", "space": "A", "id": "D"},
        {"op": "convolve", "sequence": "ones", "x": "ones", "N": 3, "id": "C"},
    ]
    return run_tasks(parse_document(doc(tasks)))


def test_json_round_trip(small_report):
    text = emit_report(small_report, "json").decode()
    jsonschema.validate(json.loads(text), REPORT_SCHEMA)
    again = from_json(text)
    assert again == small_report
    assert emit_report(again, "json").decode() == text


def test_text_rendering(small_report):
    text = emit_report(small_report, "text").decode()
    assert "agreement: Consistent" in text
    assert "k=1 → (m=1, C=" in text


def test_csv_rows(small_report):
    rows = list(csv.reader(io.StringIO(emit_report(small_report, "csv").decode())))
    assert rows[0] == ["task", "k", "status", "m", "C_log", "verified_up_to"]
    assert len(rows) - 1 == sum(len(t.rows) for t in small_report.tasks)
    assert [r[0] for r in rows[1:]].count("F") == FAST["kmax"]


def test_report_from_wrong_schema():
    with pytest.raises(ValueError):
        Report.from_dict({"schema": "other"})


# --- the command line ------------------------------------------------------


def test_cli_run_formats(tmp_path, capsysbinary):
    p = write(tmp_path, doc([{"op": "nuclear", "space": "A"}, {"op": "g1", "space": "B"}]))
    assert main(["run", str(p)]) == 0
    out = json.loads(capsysbinary.readouterr().out)
    assert [t["status"] for t in out["tasks"]] == ["Holds", "Holds"]
    assert main(["run", str(p), "--format", "csv", "--kmax", "2"]) == 0
    assert capsysbinary.readouterr().out.decode().count("\n") == 1 + 2 + 2
    out_path = tmp_path / "r.txt"
    assert main(["run", str(p), "--format", "text", "--out", str(out_path), "--budget-N", "100"]) == 0
    assert "[1:nuclear] nuclear: Holds" in out_path.read_text()


def test_cli_usage_and_parse_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json")]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["bogus"]) == 1
    p = write(tmp_path, doc([{"op": "nuclear", "space": "nope"}]))
    assert main(["run", str(p)]) == 1


def test_cli_exit_code_for_fails(tmp_path):
    p = write(tmp_path, doc([{"op": "g1", "space": "A"}]))
    assert main(["run", str(p), "--out", str(tmp_path / "o.json")]) == 2


def test_cli_timings_opt_in(tmp_path):
    p = write(tmp_path, doc([{"op": "nuclear", "space": "A"}]))
    main(["run", str(p), "--out", str(tmp_path / "a.json")])
    main(["run", str(p), "--timings", "--out", str(tmp_path / "b.json")])
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert "wall_time" not in a["tasks"][0] and b["tasks"][0]["wall_time"] >= 0


def test_cli_convolve(capsys, tmp_path):
    assert main(["convolve", "--theta", '{"form": "constant"}', "--x", "[1, 1, 1, 1, 1]", "-N", "5"]) == 0
    lines = capsys.readouterr().out.split("\n")
    assert lines[:5] == ["1 1.00000e0", "2 2.00000e0", "3 3.00000e0", "4 4.00000e0", "5 5.00000e0"]
    f = tmp_path / "theta.json"
    f.write_text('{"form": "geometric", "r": 0.5}')
    assert main(["convolve", "--theta", str(f), "--x", "[1]", "-N", "3", "--format", "json"]) == 0
    vals = json.loads(capsys.readouterr().out)
    assert [v["dec"] for v in vals] == ["5.00000e-1", "2.50000e-1", "1.25000e-1"]
    assert main(["convolve", "--theta", "[1", "--x", "[1]", "-N", "3"]) == 1
    assert main(["convolve", "--theta", "[1]", "--x", "[1]", "-N", "0"]) == 1


def test_suite_document_is_valid():
    inst = parse_document(suite_document())
    assert len(inst.tasks) == 24
    assert {t.op for t in inst.tasks} == {"theorem1", "theorem2"}


def test_thread_env(monkeypatch):
    from koethe_lab.runner import thread_count

    monkeypatch.setenv("KOETHE_LAB_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("KOETHE_LAB_THREADS", "zero")
    assert thread_count() >= 1
