"""Link analytics invocations to the UI widgets whose callbacks trigger them.

The relationship model: an activity binds layouts (``setContentView``) and
widgets (``findViewById``); widgets get listeners (``setOn*Listener``);
listeners have callbacks; callbacks reach DCM invocations. Linking uses
nearest-preceding heuristics inside one method instead of register dataflow,
and every heuristic miss is kept as a diagnostic.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .dcm import DcmMatch, SignatureDb, detect_custom_analytics, method_matches, suspicious_invocations
from .ingest import (
    AppModel,
    ConstInt,
    Diagnostic,
    Invoke,
    LayoutWidget,
    NewInstance,
    SmaliClass,
    SmaliMethod,
)
from .model import (
    CollectionEvidence,
    CollectionTechnique,
    EvidenceRecord,
    InteractionDataType,
    InvocationSite,
    WidgetRef,
)

DEFAULT_DEPTH = 2
LAYOUT_SETTERS = frozenset({"setContentView", "inflate"})
FIND_VIEW = "findViewById"
_REGISTRATION = re.compile(r"^(?:setOn\w*Listener|add\w*Listener)$")
GESTURE_ELEMENT = "GestureDetector"


@dataclass(frozen=True)
class UiTables:
    widgets: dict[str, InteractionDataType]
    widget_prefixes: tuple[str, ...]
    callbacks: frozenset[str]
    composite_callbacks: frozenset[str]
    gesture_detectors: frozenset[str]
    timing_sources: frozenset[tuple[str, str]]
    motion_accessors: frozenset[tuple[str, str]]
    infer_duration: bool = True
    infer_motion: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> UiTables:
        return cls(
            widgets={k: InteractionDataType(v) for k, v in data["widgets"].items()},
            widget_prefixes=tuple(data.get("widget_prefixes", ())),
            callbacks=frozenset(data["callbacks"]),
            composite_callbacks=frozenset(data.get("composite_callbacks", ())),
            gesture_detectors=frozenset(data.get("gesture_detectors", ())),
            timing_sources=frozenset(map(tuple, data.get("timing_sources", ()))),
            motion_accessors=frozenset(map(tuple, data.get("motion_accessors", ()))),
            infer_duration=data.get("infer_duration", True),
            infer_motion=data.get("infer_motion", True),
        )


def load_tables(path: str | Path | None = None) -> UiTables:
    if path is None:
        text = resources.files("interaction_audit.data").joinpath("ui_tables.json").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    return UiTables.from_dict(json.loads(text))


_DEFAULT_TABLES: UiTables | None = None


def default_tables() -> UiTables:
    global _DEFAULT_TABLES
    if _DEFAULT_TABLES is None:
        _DEFAULT_TABLES = load_tables()
    return _DEFAULT_TABLES


def classify_widget(
    element_name: str,
    tables: UiTables | None = None,
    diagnostics: list[Diagnostic] | None = None,
) -> InteractionDataType:
    """Map a layout element to its interaction data type (View-like default)."""
    tables = tables or default_tables()
    simple = element_name.rsplit(".", 1)[-1]
    candidates = [simple] + [
        simple[len(p) :] for p in tables.widget_prefixes if simple.startswith(p) and len(simple) > len(p)
    ]
    for name in candidates:
        if name in tables.widgets:
            return tables.widgets[name]
    if diagnostics is not None:
        diagnostics.append(
            Diagnostic(element_name, "unknown widget element; classified as Presentation")
        )
    return InteractionDataType.PRESENTATION


# ------------------------------------------------------------------------- graph


@dataclass(frozen=True)
class LayoutBinding:
    activity: str
    layout_file: str
    site: InvocationSite


@dataclass(frozen=True)
class WidgetBinding:
    activity: str
    widget: LayoutWidget
    site: InvocationSite


@dataclass(frozen=True)
class Registration:
    """One listener node: a listener object attached to exactly one widget."""

    activity: str
    widget: LayoutWidget | None
    listener_class: str
    site: InvocationSite
    gesture: bool = False

    @property
    def widget_ref(self) -> WidgetRef:
        if self.widget is None:
            return WidgetRef(None, None, GESTURE_ELEMENT)
        return WidgetRef(self.widget.layout_file, self.widget.id_name, self.widget.element_name)


@dataclass
class LinkGraph:
    app_id: str
    layout_bindings: list[LayoutBinding] = field(default_factory=list)
    widget_bindings: list[WidgetBinding] = field(default_factory=list)
    registrations: list[Registration] = field(default_factory=list)
    callbacks: dict[str, list[str]] = field(default_factory=dict)
    callback_matches: dict[tuple[str, str], list[DcmMatch]] = field(default_factory=dict)
    activity_matches: dict[str, list[DcmMatch]] = field(default_factory=dict)
    custom_classes: set[str] = field(default_factory=set)
    records: list[EvidenceRecord] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def evidence(self) -> CollectionEvidence:
        return CollectionEvidence(self.app_id, tuple(self.records))


def _site(cls: SmaliClass, method: SmaliMethod, index: int) -> InvocationSite:
    return InvocationSite(cls.name, method.key, index, method.instructions[index].line)


def _activity_classes(app: AppModel) -> list[SmaliClass]:
    return [app.classes[d] for d in app.activity_descriptors if d in app.classes]


def _layout_files(app: AppModel) -> dict[str, str]:
    files = {}
    for w in app.layouts:
        files.setdefault(w.layout_name, w.layout_file)
    return files


def _preceding_const(method: SmaliMethod, index: int) -> ConstInt | None:
    for ins in reversed(method.instructions[:index]):
        if isinstance(ins, ConstInt):
            return ins
    return None


def resolve_layout_bindings(app: AppModel):
    """Activity->layout and activity->widget edges from resource-id constants.

    Returns ``(layout_bindings, widget_bindings, diagnostics)``.
    """
    layouts, widgets, diags = [], [], []
    files = _layout_files(app)
    for cls in _activity_classes(app):
        bound: list[str] = []
        finds = []
        for method in cls.methods:
            for index, ins in enumerate(method.instructions):
                if not isinstance(ins, Invoke):
                    continue
                if ins.method_name in LAYOUT_SETTERS:
                    const = _preceding_const(method, index)
                    entry = app.resources.lookup(const.value) if const else None
                    where = f"{cls.name}->{method.key}@{index}"
                    if entry is None or entry[0] != "layout":
                        if const is not None:
                            diags.append(Diagnostic(where, f"unresolved layout constant {const.value:#x}"))
                        continue
                    path = files.get(entry[1])
                    if path is None:
                        diags.append(Diagnostic(where, f"layout {entry[1]!r} has no parsed file"))
                        continue
                    if path not in bound:
                        bound.append(path)
                    layouts.append(LayoutBinding(cls.name, path, _site(cls, method, index)))
                elif ins.method_name == FIND_VIEW:
                    finds.append((method, index))
        for method, index in finds:
            where = f"{cls.name}->{method.key}@{index}"
            const = _preceding_const(method, index)
            entry = app.resources.lookup(const.value) if const else None
            if entry is None or entry[0] != "id":
                shown = f"{const.value:#x}" if const else "none"
                diags.append(Diagnostic(where, f"unresolved view id constant {shown}"))
                continue
            widget = next(
                (w for path in bound for w in app.layouts if w.layout_file == path and w.id_name == entry[1]),
                None,
            )
            if widget is None:
                diags.append(Diagnostic(where, f"id {entry[1]!r} not found in bound layouts"))
                continue
            widgets.append(WidgetBinding(cls.name, widget, _site(cls, method, index)))
    return layouts, widgets, diags


def _param_types(descriptor: str) -> list[str]:
    return re.findall(r"\[*(?:L[^;]+;|[ZBSCIJFDV])", descriptor[1 : descriptor.index(")")])


def _is_static(method: SmaliMethod) -> bool:
    return "static" in method.modifiers


def _object_class(cls: SmaliClass, method: SmaliMethod, index: int, register: str, declared: str | None):
    """Best guess at the class of the object held in ``register`` at ``index``."""
    if register == "p0" and not _is_static(method):
        return cls.name
    news = [
        (i, ins)
        for i, ins in enumerate(method.instructions[:index])
        if isinstance(ins, NewInstance)
    ]
    for _, ins in reversed(news):
        if ins.register == register:
            return ins.class_name
    if news:
        return news[-1][1].class_name
    if declared and declared in cls.interfaces:
        return cls.name
    return declared


def resolve_listener_registrations(app: AppModel, widget_bindings: list[WidgetBinding], tables=None):
    """Widget->listener edges. Returns ``(registrations, diagnostics)``."""
    tables = tables or default_tables()
    registrations, diags = [], []
    by_method: dict[tuple[str, str], list[WidgetBinding]] = {}
    for b in widget_bindings:
        by_method.setdefault((b.site.class_name, b.site.method), []).append(b)

    for cls in _activity_classes(app):
        for method in cls.methods:
            bindings = by_method.get((cls.name, method.key), [])
            for index, ins in enumerate(method.instructions):
                if not isinstance(ins, Invoke):
                    continue
                where = f"{cls.name}->{method.key}@{index}"
                if _REGISTRATION.match(ins.method_name):
                    earlier = [b for b in bindings if b.site.index < index]
                    if not earlier:
                        diags.append(Diagnostic(where, f"{ins.method_name} without a preceding findViewById"))
                        continue
                    params = _param_types(ins.descriptor)
                    register = ins.registers[1] if len(ins.registers) > 1 else ""
                    listener = _object_class(cls, method, index, register, params[0] if params else None)
                    if listener is None:
                        diags.append(Diagnostic(where, "listener class could not be determined"))
                        continue
                    registrations.append(
                        Registration(cls.name, earlier[-1].widget, listener, _site(cls, method, index))
                    )
                elif ins.method_name == "<init>" and ins.target_class in tables.gesture_detectors:
                    params = _param_types(ins.descriptor)
                    if len(ins.registers) < 3 or len(params) < 2:
                        diags.append(Diagnostic(where, "gesture detector without a listener argument"))
                        continue
                    listener = _object_class(cls, method, index, ins.registers[2], params[1])
                    registrations.append(
                        Registration(cls.name, None, listener, _site(cls, method, index), gesture=True)
                    )

    # A detector is attributed to the widget whose onTouch forwards events to it.
    attached = []
    for reg in registrations:
        if reg.gesture:
            host = next(
                (r for r in registrations if not r.gesture and r.activity == reg.activity
                 and _forwards_touch(app, r.listener_class, tables)),
                None,
            )
            if host is not None:
                reg = Registration(reg.activity, host.widget, reg.listener_class, reg.site, gesture=True)
        attached.append(reg)
    return attached, diags


def _forwards_touch(app: AppModel, class_name: str, tables: UiTables) -> bool:
    cls = app.classes.get(class_name)
    if cls is None:
        return False
    for method in cls.methods:
        if method.name == "onTouch":
            for ins in method.instructions:
                if isinstance(ins, Invoke) and ins.method_name == "onTouchEvent" and ins.target_class in tables.gesture_detectors:
                    return True
    return False


def enumerate_callbacks(listener: SmaliClass | None, tables: UiTables | None = None) -> list[SmaliMethod]:
    """Methods of the listener class that the framework calls back."""
    if listener is None:
        return []
    tables = tables or default_tables()
    return [m for m in listener.methods if m.name in tables.callbacks]


# -------------------------------------------------------------------- reachability


def _resolve_method(app: AppModel, class_name: str, key: str):
    """Find ``key`` in ``class_name`` or its superclasses inside the app."""
    seen = set()
    while class_name in app.classes and class_name not in seen:
        seen.add(class_name)
        cls = app.classes[class_name]
        method = cls.method(key)
        if method is not None:
            return cls, method
        class_name = cls.super_name
    return None


def _reach(app: AppModel, cls: SmaliClass, method: SmaliMethod, db: SignatureDb, depth: int):
    """Breadth-first walk of intra-app calls; DCM calls are sinks and are not entered.

    Returns ``(matches, reached)`` where reached lists ``(class, method)`` pairs.
    """
    matches: dict[InvocationSite, DcmMatch] = {}
    reached = [(cls, method)]
    visited = {(cls.name, method.key)}
    frontier = deque([(cls, method, 0)])
    while frontier:
        c, m, level = frontier.popleft()
        for dm in method_matches(c, m, db):
            matches.setdefault(dm.site, dm)
        if level >= depth:
            continue
        for ins in m.instructions:
            if not isinstance(ins, Invoke) or ins.signature in db or db.is_library_class(ins.target_class):
                continue
            target = _resolve_method(app, ins.target_class, ins.method_name + ins.descriptor)
            if target is None:
                continue
            tc, tm = target
            if (tc.name, tm.key) in visited:
                continue
            visited.add((tc.name, tm.key))
            reached.append((tc, tm))
            frontier.append((tc, tm, level + 1))
    return sorted(matches.values(), key=lambda dm: dm.site), reached


def collect_dcm_invocations(
    app: AppModel, listener: SmaliClass, callback: SmaliMethod, db: SignatureDb, depth: int = DEFAULT_DEPTH
) -> list[DcmMatch]:
    """DCM matches in ``callback`` and in app methods it reaches within ``depth`` calls."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return _reach(app, listener, callback, db, depth)[0]


def _invokes_any(methods, targets: frozenset[tuple[str, str]]) -> bool:
    return any(
        isinstance(ins, Invoke) and (ins.target_class, ins.method_name) in targets
        for m in methods
        for ins in m.instructions
    )


def infer_techniques(
    app: AppModel,
    listener: SmaliClass,
    callback: SmaliMethod,
    matches: list[DcmMatch],
    depth: int = DEFAULT_DEPTH,
    enclosing: SmaliMethod | None = None,
    tables: UiTables | None = None,
) -> frozenset[CollectionTechnique]:
    """Frequency always; Duration on a timing source in the listener class or the
    registering method; MotionDetails on MotionEvent accessors reached from the callback."""
    if not matches:
        raise ValueError("technique inference needs at least one DCM match")
    tables = tables or default_tables()
    techniques = {CollectionTechnique.FREQUENCY}
    if tables.infer_duration:
        scope = list(listener.methods) + ([enclosing] if enclosing is not None else [])
        if _invokes_any(scope, tables.timing_sources):
            techniques.add(CollectionTechnique.DURATION)
    if tables.infer_motion:
        reached = [m for _, m in _reach(app, listener, callback, SignatureDb({}, {}), depth)[1]]
        if _invokes_any(reached, tables.motion_accessors):
            techniques.add(CollectionTechnique.MOTION_DETAILS)
    return frozenset(techniques)


# ------------------------------------------------------------------------ compose


def build_link_graph(
    app: AppModel,
    db: SignatureDb,
    depth: int = DEFAULT_DEPTH,
    tables: UiTables | None = None,
) -> LinkGraph:
    """Run the full linking pipeline, including custom-analytics augmentation."""
    tables = tables or default_tables()
    graph = LinkGraph(app.app_id)
    graph.custom_classes, working = detect_custom_analytics(app, db)
    for site in suspicious_invocations(app, working):
        graph.diagnostics.append(
            Diagnostic(f"{site.class_name}->{site.method}@{site.index}", "unmatched analytics-library call")
        )

    graph.layout_bindings, graph.widget_bindings, diags = resolve_layout_bindings(app)
    graph.diagnostics.extend(diags)
    graph.registrations, diags = resolve_listener_registrations(app, graph.widget_bindings, tables)
    graph.diagnostics.extend(diags)

    for cls in _activity_classes(app):
        direct = [dm for m in cls.methods for dm in method_matches(cls, m, working)]
        graph.activity_matches[cls.name] = direct

    records = set()
    for reg in graph.registrations:
        listener = app.classes.get(reg.listener_class)
        if listener is None:
            graph.diagnostics.append(
                Diagnostic(reg.listener_class, "listener class not in the app; callbacks unknown")
            )
            continue
        enclosing = _method_at(app, reg.site)
        if reg.gesture:
            base_type = InteractionDataType.GESTURE
        else:
            base_type = classify_widget(reg.widget.element_name, tables, graph.diagnostics)
        callbacks = enumerate_callbacks(listener, tables)
        graph.callbacks[reg.listener_class] = [m.key for m in callbacks]
        for callback in callbacks:
            matches = collect_dcm_invocations(app, listener, callback, working, depth)
            graph.callback_matches[(reg.listener_class, callback.key)] = matches
            if not matches:
                continue
            techniques = infer_techniques(app, listener, callback, matches, depth, enclosing, tables)
            data_type = (
                InteractionDataType.COMPOSITE_GESTURE
                if callback.name in tables.composite_callbacks
                else base_type
            )
            for dm in matches:
                records.add(
                    EvidenceRecord(
                        widget=reg.widget_ref,
                        data_type=data_type,
                        techniques=techniques,
                        invocation=dm.site,
                        library=dm.library,
                        callback=callback.name,
                        listener_class=reg.listener_class,
                    )
                )
    graph.records = sorted(records, key=EvidenceRecord.sort_key)
    return graph


def _method_at(app: AppModel, site: InvocationSite) -> SmaliMethod | None:
    cls = app.classes.get(site.class_name)
    return cls.method(site.method) if cls else None


def extract_evidence(
    app: AppModel, db: SignatureDb, depth: int = DEFAULT_DEPTH, tables: UiTables | None = None
) -> CollectionEvidence:
    return build_link_graph(app, db, depth, tables).evidence


def check_cardinalities(graph: LinkGraph, app: AppModel) -> list[str]:
    """Violations of the relationship model; an empty list means the graph is well formed."""
    problems = []
    bound = {(b.activity, b.layout_file) for b in graph.layout_bindings}
    for wb in graph.widget_bindings:
        if (wb.activity, wb.widget.layout_file) not in bound:
            problems.append(f"widget {wb.widget.id_name} bound outside its activity's layouts")
    seen_sites = set()
    for reg in graph.registrations:
        # listener <-> widget is 1-1: one registration site, one widget
        if reg.site in seen_sites:
            problems.append(f"listener node at {reg.site} attached twice")
        seen_sites.add(reg.site)
        if reg.widget is None and not reg.gesture:
            problems.append(f"listener {reg.listener_class} has no widget")
    listeners = {r.listener_class for r in graph.registrations}
    for listener_class, callback in graph.callback_matches:
        if listener_class not in listeners:
            problems.append(f"callback {callback} of unregistered listener {listener_class}")
    all_matches = [m for ms in graph.callback_matches.values() for m in ms]
    all_matches += [m for ms in graph.activity_matches.values() for m in ms]
    for dm in all_matches:
        method = _method_at(app, dm.site)
        ins = method.instructions[dm.site.index] if method else None
        if not isinstance(ins, Invoke) or ins.signature != dm.signature.triple:
            problems.append(f"DCM match at {dm.site} is not an invoke of {dm.signature.triple}")
    for rec in graph.records:
        if CollectionTechnique.FREQUENCY not in rec.techniques:
            problems.append(f"record at {rec.invocation} lacks Frequency")
    return problems
