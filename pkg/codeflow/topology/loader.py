"""Load and dump topology documents."""

import json
import logging
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from codeflow.enums import CxlType
from codeflow.errors import DanglingReference, SchemaError
from codeflow.topology.model import Topology

logger = logging.getLogger(__name__)


def _read_source(source: Union[str, Path, dict]) -> dict:
    if isinstance(source, dict):
        return source
    if isinstance(source, Path) or not str(source).lstrip().startswith("{"):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise SchemaError("document", f"cannot read {path}: {e}") from None
    else:
        text = str(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("document", f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError("document", "top level must be an object")
    return doc


def _check_references(t: Topology):
    device_ids = [dev.id for dev in t.devices]
    region_ids = [reg.id for reg in t.regions]
    for kind, ids in (("devices", device_ids), ("regions", region_ids)):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise SchemaError(kind, f"duplicate id(s): {', '.join(dupes)}")
    if not t.devices:
        raise SchemaError("devices", "at least one device is required")
    if not t.regions:
        raise SchemaError("regions", "at least one region is required")

    for dev in t.devices:
        if dev.schedulable and dev.compute_ns_per_instr is None:
            raise SchemaError(f"devices.{dev.id}.compute_ns_per_instr",
                              "required for devices that can run threads")
        if dev.local_region is not None and dev.local_region not in region_ids:
            raise DanglingReference(dev.local_region, f"local_region of device {dev.id}")
        if dev.cxl_type == CxlType.TYPE2 and dev.local_region is None:
            raise DanglingReference(None, f"type2 device {dev.id} has no local_region")

    seen = set()
    for ov in t.access_overrides:
        if ov.device not in device_ids:
            raise DanglingReference(ov.device, "access_overrides device")
        if ov.region not in region_ids:
            raise DanglingReference(ov.region, "access_overrides region")
        if (ov.device, ov.region) in seen:
            raise SchemaError("access_overrides", f"duplicate override for ({ov.device}, {ov.region})")
        seen.add((ov.device, ov.region))


def load_topology(source: Union[str, Path, dict]) -> Topology:
    """Parse a topology from a path, JSON text, or an already-decoded dict.

    Raises:
        SchemaError: malformed JSON, a missing/extra/ill-typed field, or a duplicate id.
        DanglingReference: an id that names no device or region.
    """
    doc = _read_source(source)
    try:
        t = Topology.model_validate(doc)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(part) for part in first["loc"]) or "document"
        raise SchemaError(loc, first["msg"]) from None
    _check_references(t)
    logger.debug(f"Loaded topology: {len(t.devices)} devices, {len(t.regions)} regions, "
                 f"{len(t.access_overrides)} overrides")
    return t


def dump_topology(t: Topology) -> str:
    """Serialize back to the JSON schema; load_topology(dump_topology(t)) == t."""
    return t.model_dump_json(by_alias=True, indent=2) + "\n"
