"""Load an apktool-decoded app directory: smali classes, layouts, manifest, resource ids."""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

ANDROID_NS = "{http://schemas.android.com/apk/res/android}"


class IngestError(Exception):
    """A file could not be parsed; ``path`` and ``line`` locate the problem."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ":".join(str(p) for p in (path, line) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class Diagnostic:
    source: str
    message: str

    def __str__(self):
        return f"{self.source}: {self.message}"


# ------------------------------------------------------------------- instructions


@dataclass(frozen=True)
class Invoke:
    kind: str  # virtual | static | direct | interface | super
    target_class: str
    method_name: str
    descriptor: str
    registers: tuple[str, ...] = ()
    line: int = 0

    @property
    def signature(self) -> tuple[str, str, str]:
        return (self.target_class, self.method_name, self.descriptor)


@dataclass(frozen=True)
class NewInstance:
    class_name: str
    register: str = ""
    line: int = 0


@dataclass(frozen=True)
class ConstInt:
    value: int
    register: str = ""
    line: int = 0


@dataclass(frozen=True)
class Other:
    opcode: str
    line: int = 0


Instruction = Union[Invoke, NewInstance, ConstInt, Other]


@dataclass(frozen=True)
class SmaliMethod:
    name: str
    descriptor: str
    instructions: tuple[Instruction, ...] = ()
    modifiers: tuple[str, ...] = ()

    @property
    def key(self) -> str:
        return self.name + self.descriptor

    @property
    def is_constructor(self) -> bool:
        return self.name in ("<init>", "<clinit>")


@dataclass(frozen=True)
class SmaliClass:
    name: str
    super_name: str | None
    interfaces: tuple[str, ...]
    methods: tuple[SmaliMethod, ...]
    source_path: str = ""

    def method(self, key: str) -> SmaliMethod | None:
        for m in self.methods:
            if m.key == key:
                return m
        return None


# ------------------------------------------------------------------------- smali

_CLASS_DESC = r"(?:\[*L[^;\s]+;|\[+[ZBSCIJFDV])"
_TYPE_DESC = r"(?:\[*(?:L[^;\s]+;|[ZBSCIJFDV]))"
_METHOD_DESC = rf"\((?:{_TYPE_DESC})*\){_TYPE_DESC}"

_CLASS_RE = re.compile(rf"^\.class\s+(?:[\w-]+\s+)*(L[^;\s]+;)$")
_SUPER_RE = re.compile(rf"^\.(super|implements)\s+({_CLASS_DESC})$")
_METHOD_RE = re.compile(rf"^\.method\s+((?:[\w-]+\s+)*)([\w$<>-]+)({_METHOD_DESC})$")
_INVOKE_RE = re.compile(
    rf"^invoke-(virtual|static|direct|interface|super)(/range)?\s+"
    rf"\{{([^}}]*)\}}\s*,\s*({_CLASS_DESC})->([\w$<>-]+)({_METHOD_DESC})$"
)
_NEW_RE = re.compile(rf"^new-instance\s+([vp]\d+)\s*,\s*(L[^;\s]+;)$")
_CONST_RE = re.compile(r"^(const(?:/4|/16|/high16)?)\s+([vp]\d+)\s*,\s*(-?(?:0x[0-9a-fA-F]+|\d+))$")

# Directive blocks whose bodies are data, not instructions.
_DATA_BLOCKS = {
    ".annotation": ".end annotation",
    ".subannotation": ".end subannotation",
    ".packed-switch": ".end packed-switch",
    ".sparse-switch": ".end sparse-switch",
    ".array-data": ".end array-data",
}


def _expand_registers(text: str) -> tuple[str, ...]:
    text = text.strip()
    if not text:
        return ()
    if ".." in text:
        lo, hi = (t.strip() for t in text.split(".."))
        prefix = lo[0]
        return tuple(f"{prefix}{i}" for i in range(int(lo[1:]), int(hi[1:]) + 1))
    return tuple(r.strip() for r in text.split(","))


def _to_u32(literal: str) -> int:
    return int(literal, 0) & 0xFFFFFFFF


def _strip_comment(line: str) -> str:
    # '#' inside string literals is rare in the directives we care about
    if "#" in line and '"' not in line:
        line = line.split("#", 1)[0]
    return line.strip()


def _parse_instruction(text: str, lineno: int, path: str) -> Instruction:
    opcode = text.split(None, 1)[0]
    if opcode.startswith("invoke-"):
        m = _INVOKE_RE.match(text)
        if m:
            kind, _, regs, cls, name, desc = m.groups()
            return Invoke(kind, cls, name, desc, _expand_registers(regs), lineno)
        base = opcode.split("/", 1)[0]
        if base in ("invoke-polymorphic", "invoke-custom"):
            return Other(opcode, lineno)
        raise IngestError(f"malformed invoke: {text!r}", path, lineno)
    if opcode == "new-instance":
        m = _NEW_RE.match(text)
        if not m:
            raise IngestError(f"malformed new-instance: {text!r}", path, lineno)
        return NewInstance(m.group(2), m.group(1), lineno)
    if opcode in ("const", "const/4", "const/16", "const/high16"):
        m = _CONST_RE.match(text)
        if not m:
            raise IngestError(f"malformed {opcode}: {text!r}", path, lineno)
        return ConstInt(_to_u32(m.group(3)), m.group(2), lineno)
    return Other(opcode, lineno)


def parse_smali_file(text: str, path: str = "<smali>") -> SmaliClass:
    """Parse the subset of smali needed for invocation and listener analysis."""
    name = super_name = None
    interfaces: list[str] = []
    methods: list[SmaliMethod] = []
    current = None  # (name, descriptor, modifiers, instructions, start line)
    block_end = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        if block_end:
            if line == block_end:
                block_end = None
            continue
        head = line.split(None, 1)[0]
        if head in _DATA_BLOCKS:
            block_end = _DATA_BLOCKS[head]
            continue
        if head == ".class":
            m = _CLASS_RE.match(line)
            if not m or name is not None:
                raise IngestError(f"malformed .class directive: {line!r}", path, lineno)
            name = m.group(1)
        elif head in (".super", ".implements"):
            m = _SUPER_RE.match(line)
            if not m:
                raise IngestError(f"malformed {head} directive: {line!r}", path, lineno)
            if head == ".super":
                super_name = m.group(2)
            else:
                interfaces.append(m.group(2))
        elif head == ".method":
            if current is not None:
                raise IngestError("nested .method", path, lineno)
            m = _METHOD_RE.match(line)
            if not m:
                raise IngestError(f"malformed .method directive: {line!r}", path, lineno)
            current = (m.group(2), m.group(3), tuple(m.group(1).split()), [], lineno)
        elif line == ".end method":
            if current is None:
                raise IngestError(".end method outside a method", path, lineno)
            mname, desc, mods, instructions, _ = current
            methods.append(SmaliMethod(mname, desc, tuple(instructions), mods))
            current = None
        elif head.startswith(".") or head.startswith(":"):
            continue  # .locals, .line, .field, .source, labels, ...
        elif current is not None:
            current[3].append(_parse_instruction(line, lineno, path))
        else:
            raise IngestError(f"instruction outside a method: {line!r}", path, lineno)

    if current is not None:
        raise IngestError(f"missing .end method for {current[0]}", path, current[4])
    if name is None:
        raise IngestError("missing .class directive", path, 1)
    return SmaliClass(name, super_name, tuple(interfaces), tuple(methods), path)


# ------------------------------------------------------------------------ layouts


@dataclass(frozen=True)
class LayoutWidget:
    layout_file: str
    element_name: str
    id_name: str | None = None

    @property
    def layout_name(self) -> str:
        return Path(self.layout_file).stem


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _id_name(value: str) -> str:
    for prefix in ("@+id/", "@id/"):
        if value.startswith(prefix):
            return value[len(prefix) :]
    if value.startswith(("@android:id/", "@+android:id/")):
        return "android:" + value.rsplit("/", 1)[-1]
    return value


def _parse_xml(text: str, path: str) -> ET.Element:
    try:
        return ET.fromstring(text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise IngestError(f"XML syntax error at column {col}: {exc}", path, line) from None


def parse_layout_xml(text: str, path: str = "<layout>") -> list[LayoutWidget]:
    """One widget per element, in document order."""
    root = _parse_xml(text, path)
    widgets = []
    seen = set()
    for elem in root.iter():
        raw_id = elem.get(ANDROID_NS + "id")
        id_name = _id_name(raw_id) if raw_id else None
        if id_name is not None:
            if id_name in seen:
                raise IngestError(f"duplicate widget id {id_name!r}", path)
            seen.add(id_name)
        widgets.append(LayoutWidget(path, _local(elem.tag), id_name))
    return widgets


# ----------------------------------------------------------------------- manifest


@dataclass(frozen=True)
class ManifestInfo:
    package_name: str
    activities: tuple[str, ...] = ()


def resolve_class_name(package: str, name: str) -> str:
    if name.startswith("."):
        return package + name
    if "." not in name:
        return f"{package}.{name}"
    return name


def class_descriptor(java_name: str) -> str:
    return "L" + java_name.replace(".", "/") + ";"


def parse_manifest(text: str, path: str = "AndroidManifest.xml") -> ManifestInfo:
    root = _parse_xml(text, path)
    if _local(root.tag) != "manifest":
        raise IngestError("root element is not <manifest>", path)
    package = root.get("package")
    if not package:
        raise IngestError("manifest has no package attribute", path)
    activities = []
    for elem in root.iter():
        if _local(elem.tag) == "activity":
            name = elem.get(ANDROID_NS + "name")
            if name:
                activities.append(resolve_class_name(package, name))
    return ManifestInfo(package, tuple(activities))


# ---------------------------------------------------------------------- resources

RESOURCE_TYPES = ("id", "layout")


@dataclass(frozen=True)
class ResourceTable:
    entries: dict[int, tuple[str, str]] = field(default_factory=dict)

    def lookup(self, value: int) -> tuple[str, str] | None:
        return self.entries.get(value & 0xFFFFFFFF)

    def value_of(self, type_: str, name: str) -> int | None:
        for value, entry in self.entries.items():
            if entry == (type_, name):
                return value
        return None


def parse_public_xml(text: str, path: str = "res/values/public.xml") -> ResourceTable:
    root = _parse_xml(text, path)
    entries: dict[int, tuple[str, str]] = {}
    names = set()
    for elem in root.iter("public"):
        type_, name, raw = elem.get("type"), elem.get("name"), elem.get("id")
        if type_ not in RESOURCE_TYPES:
            continue
        if not name or not raw:
            raise IngestError("public entry without name or id", path)
        try:
            value = _to_u32(raw)
        except ValueError:
            raise IngestError(f"bad resource id {raw!r}", path) from None
        if (type_, name) in names:
            raise IngestError(f"duplicate resource {type_}/{name}", path)
        if value in entries:
            raise IngestError(f"resource id {raw} assigned twice", path)
        names.add((type_, name))
        entries[value] = (type_, name)
    return ResourceTable(entries)


# ------------------------------------------------------------------------- loader


@dataclass
class AppModel:
    root: str
    manifest: ManifestInfo
    classes: dict[str, SmaliClass]
    layouts: list[LayoutWidget]
    resources: ResourceTable
    warnings: list[Diagnostic] = field(default_factory=list)

    @property
    def app_id(self) -> str:
        return self.manifest.package_name or Path(self.root).name

    @property
    def activity_descriptors(self) -> list[str]:
        return [class_descriptor(a) for a in self.manifest.activities]

    def iter_methods(self):
        for cls in self.classes.values():
            for method in cls.methods:
                yield cls, method

    def structure(self) -> tuple:
        """Structural identity, independent of the directory location."""
        return (
            self.manifest,
            tuple(sorted(self.classes.items())),
            tuple(self.layouts),
            tuple(sorted(self.resources.entries.items())),
            tuple(self.warnings),
        )


def _smali_roots(root: Path) -> list[Path]:
    def order(p: Path):
        m = re.fullmatch(r"smali(?:_classes(\d+))?", p.name)
        return int(m.group(1) or 1) if m else 10**6

    dirs = [p for p in root.iterdir() if p.is_dir() and re.fullmatch(r"smali(_classes\d+)?", p.name)]
    return sorted(dirs, key=order)


def _read(path: Path, root: Path, warnings: list[Diagnostic]) -> str | None:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        warnings.append(Diagnostic(str(path.relative_to(root)), f"unreadable: {exc}"))
        return None


def load_app(directory: str | Path) -> AppModel:
    """Parse every relevant file under an apktool output directory.

    A missing manifest is fatal; per-file problems become warnings.
    """
    root = Path(directory)
    manifest_path = root / "AndroidManifest.xml"
    if not manifest_path.is_file():
        raise IngestError("AndroidManifest.xml not found", str(root))
    manifest = parse_manifest(manifest_path.read_text(encoding="utf-8"), str(manifest_path))
    warnings: list[Diagnostic] = []

    classes: dict[str, SmaliClass] = {}
    for smali_root in _smali_roots(root):
        for path in sorted(smali_root.rglob("*.smali")):
            rel = str(path.relative_to(root))
            text = _read(path, root, warnings)
            if text is None:
                continue
            try:
                cls = parse_smali_file(text, rel)
            except IngestError as exc:
                warnings.append(Diagnostic(rel, f"skipped: {exc}"))
                continue
            if cls.name in classes:
                warnings.append(
                    Diagnostic(rel, f"duplicate class {cls.name}; keeping {classes[cls.name].source_path}")
                )
                continue
            classes[cls.name] = cls

    layouts: list[LayoutWidget] = []
    layout_dir = root / "res" / "layout"
    if layout_dir.is_dir():
        for path in sorted(layout_dir.glob("*.xml")):
            rel = str(path.relative_to(root))
            text = _read(path, root, warnings)
            if text is None:
                continue
            try:
                layouts.extend(parse_layout_xml(text, rel))
            except IngestError as exc:
                warnings.append(Diagnostic(rel, f"skipped: {exc}"))

    public = root / "res" / "values" / "public.xml"
    resources = ResourceTable()
    if public.is_file():
        text = _read(public, root, warnings)
        if text is not None:
            try:
                resources = parse_public_xml(text, str(public.relative_to(root)))
            except IngestError as exc:
                warnings.append(Diagnostic("res/values/public.xml", f"skipped: {exc}"))
    else:
        warnings.append(Diagnostic("res/values/public.xml", "absent; resource ids cannot be resolved"))

    for activity in manifest.activities:
        if class_descriptor(activity) not in classes:
            warnings.append(Diagnostic("AndroidManifest.xml", f"activity class {activity} not found"))

    return AppModel(str(root), manifest, classes, layouts, resources, warnings)
