"""Incremental results store.

Layout of an output directory::

    experimentDescription.xml   copy of the description
    envDescription.txt          copy of the environment description
    index.xml                   file roles and start time
    configs.xml                 distinct target configurations
    conditions.xml              distinct conditions of use
    resultobjs.xml              raw outcome of every trial
    results.xml                 aggregated response of every trial
    links.xml                   one link per trial tying the above together

Each data file holds one XML element per line between its opening and closing
root tags. Appending rewrites only the closing tag, so a crash can at worst
leave a partial last line, which resume discards. Links are written last, so a
trial is only visible once all its parts are on disk.
"""

from __future__ import annotations

import logging
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from tactkit.errors import DescriptionError, StoreError
from tactkit.experiment import (
    Combination,
    ExperimentDescription,
    format_level,
    parse_experiment_description,
    parse_level,
    serialize_experiment_description,
)
from tactkit.harness import TrialResult

log = logging.getLogger(__name__)

DESCRIPTION_FILE = "experimentDescription.xml"
ENVIRONMENT_FILE = "envDescription.txt"
INDEX_FILE = "index.xml"
FORMAT_VERSION = "1"

# file name -> (root tag, entry tag)
DATA_FILES = {
    "configs.xml": ("configurations", "configuration"),
    "conditions.xml": ("conditions", "condition"),
    "resultobjs.xml": ("resultObjs", "resultObj"),
    "results.xml": ("results", "result"),
    "links.xml": ("links", "link"),
}
ROOT_ATTRS = {"results.xml": {"responses": "aggregated"}}


@dataclass(frozen=True)
class TrialRecord:
    sequence_number: int
    combination: Combination
    result: TrialResult
    response: Optional[float]
    timestamp: float
    attempts: int = 1
    note: str = ""

    def __post_init__(self):
        if (self.response is not None) != self.result.ok:
            raise StoreError("a response is present exactly when the trial succeeded")


def _fnum(x: float) -> str:
    return repr(float(x))


def _element(tag: str, attrs: Dict[str, str], children=()) -> ET.Element:
    e = ET.Element(tag, attrs)
    for ctag, cattrs, text in children:
        c = ET.SubElement(e, ctag, cattrs)
        c.text = text
    return e


def _line(e: ET.Element) -> str:
    return ET.tostring(e, encoding="unicode").replace("\n", "&#10;")


def _root_open(name):
    tag, _ = DATA_FILES[name]
    attrs = "".join(f' {k}="{v}"' for k, v in ROOT_ATTRS.get(name, {}).items())
    return f'<?xml version="1.0" encoding="UTF-8"?>\n<{tag}{attrs}>\n'


def _root_close(name):
    return f"</{DATA_FILES[name][0]}>\n"


class ResultsStore:
    """In-memory list of trial records mirrored to an output directory."""

    def __init__(self, directory, description: ExperimentDescription, started: float = 0.0):
        self.directory = Path(directory)
        self.description = description
        self.started = started
        self.records: List[TrialRecord] = []
        self._config_ids: Dict[Tuple, str] = {}
        self._condition_ids: Dict[Tuple, str] = {}

    # -- creation ------------------------------------------------------------
    @classmethod
    def create(cls, directory, description: ExperimentDescription, description_text: Optional[str] = None,
               environment_text: str = "", started: float = 0.0) -> "ResultsStore":
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if (directory / "links.xml").exists():
            raise StoreError(f"{directory} already holds an experiment; use resume")
        store = cls(directory, description, started)
        text = description_text if description_text is not None else serialize_experiment_description(description)
        store._write(DESCRIPTION_FILE, text)
        store._write(ENVIRONMENT_FILE, environment_text)
        store._write_index()
        for name in DATA_FILES:
            store._write(name, _root_open(name) + _root_close(name))
        return store

    def _write(self, name, text):
        path = self.directory / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())

    def _write_index(self):
        root = ET.Element("index", {"format": FORMAT_VERSION, "started": _fnum(self.started)})
        for role, name in [("description", DESCRIPTION_FILE), ("environment", ENVIRONMENT_FILE)] + \
                [(DATA_FILES[n][0], n) for n in DATA_FILES]:
            ET.SubElement(root, "file", {"role": role, "name": name})
        ET.indent(root)
        self._write(INDEX_FILE, '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n")

    # -- appending -----------------------------------------------------------
    def _append(self, name, element: ET.Element):
        path = self.directory / name
        close = _root_close(name).encode()
        try:
            with open(path, "r+b") as fh:
                fh.seek(0, os.SEEK_END)
                size = fh.tell()
                fh.seek(size - len(close))
                if fh.read(len(close)) != close:
                    raise StoreError(f"{path} does not end with its closing tag")
                fh.seek(size - len(close))
                fh.write((_line(element) + "\n").encode() + close)
                fh.truncate()
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as e:
            raise StoreError(f"cannot write {path}: {e}") from e

    def _levels_element(self, tag, ident, pairs):
        return _element(tag, {"id": ident},
                        [("level", {"factor": k}, format_level(v)) for k, v in pairs])

    def record(self, rec: TrialRecord) -> None:
        if rec.sequence_number != len(self.records):
            raise StoreError(f"expected sequence number {len(self.records)}, got {rec.sequence_number}")
        cfg_key, cond_key = rec.combination.configuration, rec.combination.condition
        if cfg_key not in self._config_ids:
            ident = f"c{len(self._config_ids)}"
            self._append("configs.xml", self._levels_element("configuration", ident, cfg_key))
            self._config_ids[cfg_key] = ident
        if cond_key not in self._condition_ids:
            ident = f"k{len(self._condition_ids)}"
            self._append("conditions.xml", self._levels_element("condition", ident, cond_key))
            self._condition_ids[cond_key] = ident
        rid = f"r{rec.sequence_number}"
        res = rec.result
        if res.ok:
            obj = _element("resultObj", {"id": rid, "status": "success", "wallTime": _fnum(res.wall_time)},
                           [("metric", {"name": k}, _fnum(v)) for k, v in res.metrics])
        else:
            obj = _element("resultObj", {"id": rid, "status": "failure", "stage": res.stage,
                                         "wallTime": _fnum(res.wall_time)},
                           [("detail", {}, res.detail)])
        self._append("resultobjs.xml", obj)
        attrs = {"id": rid, "attempts": str(rec.attempts)}
        if rec.response is not None:
            attrs["response"] = _fnum(rec.response)
        self._append("results.xml", _element("result", attrs, [("note", {}, rec.note)] if rec.note else []))
        self._append("links.xml", _element("link", {
            "seq": str(rec.sequence_number), "configuration": self._config_ids[cfg_key],
            "condition": self._condition_ids[cond_key], "resultObj": rid, "result": rid,
            "timestamp": _fnum(rec.timestamp)}))
        self.records.append(rec)

    # -- export --------------------------------------------------------------
    def export_tab_separated(self) -> str:
        desc = self.description
        lines = ["\t".join([f.name for f in desc.factors] + list(desc.metrics))]
        for rec in self.records:
            levels = rec.combination.levels()
            cells = [format_level(levels[f.name]) for f in desc.factors]
            if rec.result.ok:
                vals = rec.result.values
                cells += [_fnum(vals[m]) for m in desc.metrics]
            else:
                cells += ["ERROR"] * len(desc.metrics)
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"

    # -- resume --------------------------------------------------------------
    @classmethod
    def load(cls, directory) -> "ResultsStore":
        """Read-only view of a store on disk, for analysis."""
        desc, _, _, started, records = cls._read(Path(directory))
        store = cls(directory, desc, started)
        store.records = records
        return store

    @classmethod
    def resume_from(cls, directory) -> Tuple["ResultsStore", int]:
        """Rebuild the store from disk, drop any partial trailing entry and
        rewrite the files in canonical form."""
        directory = Path(directory)
        desc, desc_text, env_text, started, records = cls._read(directory)
        for name in DATA_FILES:
            (directory / name).unlink()
        store = cls.create(directory, desc, desc_text, env_text, started)
        for rec in records:
            store.record(rec)
        return store, len(records)

    @classmethod
    def _read(cls, directory: Path):
        try:
            desc_text = (directory / DESCRIPTION_FILE).read_text(encoding="utf-8")
        except OSError as e:
            raise StoreError(f"{directory / DESCRIPTION_FILE}: cannot read ({e.strerror})") from None
        try:
            desc = parse_experiment_description(desc_text)
        except DescriptionError as e:
            raise StoreError(f"{directory / DESCRIPTION_FILE}: {e}") from None
        env_path = directory / ENVIRONMENT_FILE
        env_text = env_path.read_text(encoding="utf-8") if env_path.exists() else ""
        started = cls._read_started(directory)
        entries = {name: cls._read_entries(directory / name, DATA_FILES[name][1]) for name in DATA_FILES}
        kinds = {f.name: f.domain.kind for f in desc.factors}

        def levels_of(e):
            out = {}
            for lv in e.findall("level"):
                name = lv.get("factor")
                if name not in kinds:
                    raise StoreError(f"stored level for undeclared factor {name!r}")
                out[name] = parse_level(lv.text or "", kinds[name], name)
            return out

        configs = {e.get("id"): levels_of(e) for e in entries["configs.xml"]}
        conds = {e.get("id"): levels_of(e) for e in entries["conditions.xml"]}
        objs = {e.get("id"): e for e in entries["resultobjs.xml"]}
        results = {e.get("id"): e for e in entries["results.xml"]}

        records = []
        links = entries["links.xml"]
        for pos, link in enumerate(links):
            refs = (configs.get(link.get("configuration")), conds.get(link.get("condition")),
                    objs.get(link.get("resultObj")), results.get(link.get("result")))
            if any(r is None for r in refs) or int(link.get("seq")) != len(records):
                if pos == len(links) - 1:
                    log.warning("%s: discarding incomplete final trial", directory / "links.xml")
                    break
                raise StoreError(f"{directory / 'links.xml'}: link {pos} references missing entries")
            cfg, cond, obj, res = refs
            if obj.get("status") == "success":
                result = TrialResult.success([(m.get("name"), float(m.text)) for m in obj.findall("metric")],
                                             float(obj.get("wallTime")))
            else:
                detail = obj.find("detail")
                result = TrialResult.failure(obj.get("stage"), detail.text or "" if detail is not None else "",
                                             float(obj.get("wallTime")))
            note = res.find("note")
            response = res.get("response")
            records.append(TrialRecord(len(records), Combination.of(cfg, cond), result,
                                       float(response) if response is not None else None,
                                       float(link.get("timestamp")), int(res.get("attempts", "1")),
                                       (note.text or "") if note is not None else ""))
        return desc, desc_text, env_text, started, records

    @staticmethod
    def _read_started(directory) -> float:
        try:
            root = ET.parse(directory / INDEX_FILE).getroot()
            return float(root.get("started", "0"))
        except (OSError, ET.ParseError, ValueError) as e:
            raise StoreError(f"{directory / INDEX_FILE}: unreadable ({e})") from None

    @staticmethod
    def _read_entries(path: Path, tag: str) -> List[ET.Element]:
        try:
            lines = path.read_text(encoding="utf-8").split("\n")
        except OSError as e:
            raise StoreError(f"{path}: cannot read ({e.strerror})") from None
        body = [ln for ln in lines[2:] if ln.strip()]
        if body and body[-1].startswith("</"):
            body = body[:-1]
        out = []
        for n, ln in enumerate(body):
            try:
                e = ET.fromstring(ln)
            except ET.ParseError:
                e = None
            if e is None or e.tag != tag:
                if n == len(body) - 1:
                    log.warning("%s: discarding partial final entry", path)
                    break
                raise StoreError(f"{path}: corrupt entry on line {n + 3}")
            out.append(e)
        return out
