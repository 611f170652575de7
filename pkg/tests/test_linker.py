import dataclasses
import shutil

import pytest
from conftest import APPS, APP_NAMES

from interaction_audit.dcm import parse_signatures
from interaction_audit.ingest import load_app
from interaction_audit.linker import (
    build_link_graph,
    check_cardinalities,
    classify_widget,
    collect_dcm_invocations,
    default_tables,
    enumerate_callbacks,
    extract_evidence,
    infer_techniques,
    resolve_layout_bindings,
    resolve_listener_registrations,
)
from interaction_audit.model import CollectionTechnique as Q, InteractionDataType as T

MIN = "Lcom/example/minimal/MainActivity;"
MIN_L = "Lcom/example/minimal/MainActivity$1;"
DRAW = "Lcom/example/draw/CanvasActivity"


def _copy(tmp_path, name):
    shutil.copytree(APPS / name, tmp_path / name)
    return tmp_path / name


def _edit(path, old, new):
    text = path.read_text()
    assert old in text
    path.write_text(text.replace(old, new))


def test_layout_and_widget_edges(apps):
    layouts, widgets, diags = resolve_layout_bindings(apps["minimal"])
    assert [(b.activity, b.layout_file) for b in layouts] == [(MIN, "res/layout/main.xml")]
    assert [(b.widget.element_name, b.widget.id_name) for b in widgets] == [("Button", "send")]
    assert diags == []


def test_find_view_outside_bound_layouts(tmp_path):
    root = _copy(tmp_path, "minimal")
    _edit(root / "res/values/public.xml", "</resources>", '    <public type="id" name="ghost" id="0x7f080009" />\n</resources>')
    _edit(root / "smali/com/example/minimal/MainActivity.smali", "const v0, 0x7f080001", "const v0, 0x7f080009")
    _, widgets, diags = resolve_layout_bindings(load_app(root))
    assert widgets == []
    assert any("ghost" in d.message for d in diags)


def test_unresolvable_constant(tmp_path):
    root = _copy(tmp_path, "minimal")
    _edit(root / "smali/com/example/minimal/MainActivity.smali", "const v0, 0x7f080001", "const v0, 0x7f0b0001")
    _, widgets, diags = resolve_layout_bindings(load_app(root))
    assert widgets == [] and any("unresolved view id" in d.message for d in diags)


def test_no_set_content_view(tmp_path):
    root = _copy(tmp_path, "minimal")
    _edit(root / "smali/com/example/minimal/MainActivity.smali", "setContentView", "setTitle")
    layouts, widgets, _ = resolve_layout_bindings(load_app(root))
    assert layouts == [] and widgets == []


def test_listener_from_new_instance(apps):
    app = apps["minimal"]
    _, widgets, _ = resolve_layout_bindings(app)
    regs, diags = resolve_listener_registrations(app, widgets)
    assert [(r.widget.id_name, r.listener_class) for r in regs] == [("send", MIN_L)]
    assert diags == []


def test_listener_is_the_activity(apps):
    app = apps["this_listener"]
    _, widgets, _ = resolve_layout_bindings(app)
    (reg,), _ = resolve_listener_registrations(app, widgets)
    assert reg.listener_class == "Lcom/example/selfl/SettingsActivity;"


def test_registration_without_find_view(tmp_path):
    root = _copy(tmp_path, "minimal")
    _edit(root / "smali/com/example/minimal/MainActivity.smali", "->findViewById(I)", "->getView(I)")
    app = load_app(root)
    _, widgets, _ = resolve_layout_bindings(app)
    regs, diags = resolve_listener_registrations(app, widgets)
    assert regs == [] and any("setOnClickListener" in d.message for d in diags)


def test_enumerate_callbacks(apps):
    assert [m.name for m in enumerate_callbacks(apps["minimal"].classes[MIN_L])] == ["onClick"]
    gl = apps["gestures"].classes[DRAW + "$2;"]
    assert [m.name for m in enumerate_callbacks(gl)] == ["onFling", "onDoubleTap"]
    assert enumerate_callbacks(apps["custom"].classes["Lcom/example/custom/util/Tracker;"]) == []


def _callback(app, cls, name):
    c = app.classes[cls]
    return c, next(m for m in c.methods if m.name == name)


def test_direct_and_wrapped_dcm(apps, db):
    cls, cb = _callback(apps["minimal"], MIN_L, "onClick")
    assert len(collect_dcm_invocations(apps["minimal"], cls, cb, db, 0)) == 1
    app = apps["wrapper"]
    cls, cb = _callback(app, "Lcom/example/wrapper/MainActivity$1;", "onClick")
    assert len(collect_dcm_invocations(app, cls, cb, db, 2)) == 1
    assert collect_dcm_invocations(app, cls, cb, db, 0) == []


def test_recursive_helpers_terminate(apps, db):
    app = apps["wrapper"]
    cls, cb = _callback(app, "Lcom/example/wrapper/MainActivity$1;", "onClick")
    matches = collect_dcm_invocations(app, cls, cb, db, 50)
    assert len(matches) == len({m.site for m in matches}) == 1


def test_negative_depth(apps, db):
    cls, cb = _callback(apps["minimal"], MIN_L, "onClick")
    with pytest.raises(ValueError):
        collect_dcm_invocations(apps["minimal"], cls, cb, db, -1)


@pytest.mark.parametrize(
    "element, expected",
    [
        ("Button", T.BINARY),
        ("EditText", T.USER_INPUT),
        ("Spinner", T.CATEGORICAL),
        ("ScrollView", T.GESTURE),
        ("com.google.android.material.button.MaterialButton", T.BINARY),
        ("androidx.appcompat.widget.AppCompatEditText", T.USER_INPUT),
        ("View", T.PRESENTATION),
    ],
)
def test_classify_widget(element, expected):
    diags = []
    assert classify_widget(element, diagnostics=diags) is expected
    assert diags == []


def test_unknown_widget_defaults_to_presentation():
    diags = []
    assert classify_widget("MyCustomChart", diagnostics=diags) is T.PRESENTATION
    assert len(diags) == 1


def test_technique_rules(apps, db):
    app = apps["minimal"]
    cls, cb = _callback(app, MIN_L, "onClick")
    matches = collect_dcm_invocations(app, cls, cb, db)
    assert infer_techniques(app, cls, cb, matches) == {Q.FREQUENCY}
    with pytest.raises(ValueError):
        infer_techniques(app, cls, cb, [])

    app = apps["gestures"]
    cls, cb = _callback(app, DRAW + "$1;", "onTouch")
    matches = collect_dcm_invocations(app, cls, cb, db)
    assert infer_techniques(app, cls, cb, matches) == {Q.FREQUENCY, Q.MOTION_DETAILS}
    off = dataclasses.replace(default_tables(), infer_motion=False)
    assert infer_techniques(app, cls, cb, matches, tables=off) == {Q.FREQUENCY}

    cls, cb = _callback(app, DRAW + "$3;", "onClick")
    matches = collect_dcm_invocations(app, cls, cb, db)
    assert infer_techniques(app, cls, cb, matches) == {Q.FREQUENCY, Q.DURATION}


def test_minimal_evidence(apps, db):
    (record,) = extract_evidence(apps["minimal"], db).records
    assert (record.data_type, record.techniques, record.library) == (T.BINARY, {Q.FREQUENCY}, "Firebase Analytics")
    assert (record.widget.id_name, record.callback, record.listener_class) == ("send", "onClick", MIN_L)


def test_zero_dcm_app(apps):
    assert extract_evidence(apps["minimal"], parse_signatures([])).records == ()


def test_yr_sets(apps, db):
    ev = extract_evidence(apps["yr"], db)
    assert ev.evidenced_types == {T.PRESENTATION, T.BINARY, T.CATEGORICAL, T.USER_INPUT}
    assert ev.evidenced_techniques == {Q.FREQUENCY}
    assert {r.widget.element_name for r in ev.records if r.data_type is T.USER_INPUT} == {"SearchView", "EditText"}


def test_gesture_records(apps, db):
    records = extract_evidence(apps["gestures"], db).records
    by_callback = {r.callback: r for r in records}
    assert by_callback["onFling"].data_type is T.GESTURE
    assert by_callback["onDoubleTap"].data_type is T.COMPOSITE_GESTURE
    assert by_callback["onFling"].widget.id_name == "board"  # via the onTouch forwarding
    assert by_callback["onTouch"].data_type is T.PRESENTATION


def test_detached_gesture_detector(tmp_path, db):
    root = _copy(tmp_path, "gestures")
    _edit(root / "smali/com/example/draw/CanvasActivity$1.smali", "->onTouchEvent(", "->toString(")
    records = extract_evidence(load_app(root), db).records
    fling = next(r for r in records if r.callback == "onFling")
    assert (fling.widget.layout_file, fling.widget.id_name, fling.widget.element_name) == (None, None, "GestureDetector")


def test_custom_records_and_activity_edges(apps, db):
    graph = build_link_graph(apps["custom"], db)
    (record,) = graph.records
    assert record.library == "custom"
    direct = graph.activity_matches["Lcom/example/custom/HomeActivity;"]
    assert [m.signature.method_name for m in direct] == ["track"]


@pytest.mark.parametrize("name", APP_NAMES)
@pytest.mark.parametrize("depth", [0, 1, 2, 3])
def test_graph_invariants(apps, db, name, depth):
    graph = build_link_graph(apps[name], db, depth)
    assert check_cardinalities(graph, apps[name]) == []
    keys = [r.sort_key() for r in graph.records]
    assert keys == sorted(keys)
    assert all(Q.FREQUENCY in r.techniques for r in graph.records)


def test_extraction_is_deterministic(db):
    a = extract_evidence(load_app(APPS / "yr"), db)
    b = extract_evidence(load_app(APPS / "yr"), db)
    assert a == b and a.to_dict() == b.to_dict()


def test_cardinality_check_detects_violations(apps, db):
    app = apps["minimal"]
    graph = build_link_graph(app, db)
    graph.registrations.append(graph.registrations[0])  # one listener node on two widgets
    graph.callback_matches[("Lnot/Registered;", "onClick(Landroid/view/View;)V")] = []
    match = graph.callback_matches[(MIN_L, "onClick(Landroid/view/View;)V")][0]
    moved = dataclasses.replace(match, site=dataclasses.replace(match.site, index=0))
    graph.activity_matches[MIN] = [moved]
    problems = check_cardinalities(graph, app)
    assert any("attached twice" in p for p in problems)
    assert any("unregistered listener" in p for p in problems)
    assert any("is not an invoke of" in p for p in problems)
