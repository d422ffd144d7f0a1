"""Typed in-memory clinical tables with referential integrity, plus CSV load/save.

The on-disk layout is one UTF-8 CSV file per table (RFC-4180 quoting, ``\\n``
line endings, header row of lower_snake_case field names). Tables are frozen
after construction; the gateway is read-only over clinical rows by design.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, fields
from datetime import date
from pathlib import Path
from typing import Iterable

from .errors import (
    DuplicateKey,
    IoFailure,
    MalformedRow,
    MissingTableFile,
    ReferentialIntegrityViolation,
)

GENDERS = ("F", "M")


@dataclass(frozen=True)
class PatientRecord:
    pid: int
    name: str
    surname: str
    gender: str
    dob: date
    country: str
    street_address: str
    city: str
    postal: str


@dataclass(frozen=True)
class ExaminationRecord:
    report_id: int
    patient_id: int
    endoscopy_date: date
    diagnoses_text: str


@dataclass(frozen=True)
class ClinicalDetectionRecord:
    detection_id: int
    patient_id: int
    times: int
    hbsag: int
    antihbs: int
    detection_date: date


@dataclass(frozen=True)
class DoctorRecord:
    doctor_id: int
    given_name: str
    family_name: str


@dataclass(frozen=True)
class PrescriptionRecord:
    prescription_id: int
    patient_id: int
    doctor_id: int
    prescription_date: date


@dataclass(frozen=True)
class MedicationRecord:
    medication_id: int
    medication_name: str


@dataclass(frozen=True)
class PrescriptMedRecord:
    prescription_id: int
    medication_id: int


@dataclass(frozen=True)
class ClinicalTables:
    patients: tuple[PatientRecord, ...] = ()
    examinations: tuple[ExaminationRecord, ...] = ()
    clinical_detections: tuple[ClinicalDetectionRecord, ...] = ()
    doctors: tuple[DoctorRecord, ...] = ()
    prescriptions: tuple[PrescriptionRecord, ...] = ()
    medications: tuple[MedicationRecord, ...] = ()
    prescript_meds: tuple[PrescriptMedRecord, ...] = ()


# filename -> (attribute on ClinicalTables, record class)
TABLE_FILES = {
    "patient.csv": ("patients", PatientRecord),
    "examination.csv": ("examinations", ExaminationRecord),
    "clinicaldetection.csv": ("clinical_detections", ClinicalDetectionRecord),
    "doctor.csv": ("doctors", DoctorRecord),
    "prescription.csv": ("prescriptions", PrescriptionRecord),
    "medication.csv": ("medications", MedicationRecord),
    "prescriptmed.csv": ("prescript_meds", PrescriptMedRecord),
}


def _parse_int(raw: str) -> int:
    if not raw or raw != raw.strip():
        raise ValueError(f"bad integer {raw!r}")
    return int(raw, 10)


def parse_iso_date(raw: str) -> date:
    """Strict YYYY-MM-DD parse; rejects the looser forms fromisoformat allows."""
    if len(raw) != 10 or raw[4] != "-" or raw[7] != "-":
        raise ValueError(f"bad date {raw!r}")
    return date(int(raw[0:4]), int(raw[5:7]), int(raw[8:10]))


def _field_to_text(value) -> str:
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


def _text_to_field(raw: str, ftype, fname: str):
    if ftype is int:
        value = _parse_int(raw)
        if fname == "times" and value < 1:
            raise ValueError("times must be >= 1")
        if fname in ("hbsag", "antihbs") and value not in (0, 1):
            raise ValueError(f"{fname} must be 0 or 1")
        return value
    if ftype is date:
        return parse_iso_date(raw)
    if fname == "gender":
        if raw not in GENDERS:
            raise ValueError(f"gender must be one of {GENDERS}")
        return raw
    return raw


def validate(tables: ClinicalTables) -> ClinicalTables:
    """Check all uniqueness and foreign-key invariants; returns the input."""
    def unique(values: Iterable, table: str, what: str):
        seen = set()
        for v in values:
            if v in seen:
                raise DuplicateKey(f"{table}: duplicate {what} {v!r}")
            seen.add(v)
        return seen

    pids = unique((p.pid for p in tables.patients), "patient", "pid")
    unique((e.report_id for e in tables.examinations), "examination", "report_id")
    unique((d.detection_id for d in tables.clinical_detections), "clinicaldetection", "detection_id")
    doctor_ids = unique((d.doctor_id for d in tables.doctors), "doctor", "doctor_id")
    rx_ids = unique((p.prescription_id for p in tables.prescriptions), "prescription", "prescription_id")
    med_ids = unique((m.medication_id for m in tables.medications), "medication", "medication_id")
    unique((m.medication_name for m in tables.medications), "medication", "medication_name")
    unique(
        ((pm.prescription_id, pm.medication_id) for pm in tables.prescript_meds),
        "prescriptmed",
        "(prescription_id, medication_id)",
    )

    def check_ref(rows, table: str, attr: str, valid: set):
        for i, row in enumerate(rows, start=1):
            value = getattr(row, attr)
            if value not in valid:
                raise ReferentialIntegrityViolation(table, i, f"{attr}={value}")

    check_ref(tables.examinations, "examination", "patient_id", pids)
    check_ref(tables.clinical_detections, "clinicaldetection", "patient_id", pids)
    check_ref(tables.prescriptions, "prescription", "patient_id", pids)
    check_ref(tables.prescriptions, "prescription", "doctor_id", doctor_ids)
    check_ref(tables.prescript_meds, "prescriptmed", "prescription_id", rx_ids)
    check_ref(tables.prescript_meds, "prescriptmed", "medication_id", med_ids)
    return tables


def _load_table(path: Path, record_cls):
    spec = fields(record_cls)
    header = [f.name for f in spec]
    rows = []
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingTableFile(str(path)) from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    reader = csv.reader(io.StringIO(raw, newline=""))
    try:
        got_header = next(reader)
    except StopIteration:
        raise MalformedRow(path.name, 1, "missing header row") from None
    if got_header != header:
        raise MalformedRow(path.name, 1, f"expected header {header}, got {got_header}")

    for lineno, values in enumerate(reader, start=2):
        if len(values) != len(spec):
            raise MalformedRow(path.name, lineno, f"expected {len(spec)} fields, got {len(values)}")
        try:
            converted = [
                _text_to_field(v, _FIELD_TYPES[record_cls][f.name], f.name)
                for v, f in zip(values, spec)
            ]
        except ValueError as exc:
            raise MalformedRow(path.name, lineno, str(exc)) from exc
        rows.append(record_cls(*converted))
    return tuple(rows)


# dataclasses under `from __future__ import annotations` report field types as
# strings; resolve them once here.
_FIELD_TYPES = {
    cls: {name: {"int": int, "str": str, "date": date}[tname]
          for name, tname in ((f.name, f.type) for f in fields(cls))}
    for _, cls in TABLE_FILES.values()
}


def load_tables(directory_path: str | os.PathLike) -> ClinicalTables:
    """Load and fully validate all seven tables from ``directory_path``."""
    directory = Path(directory_path)
    loaded = {}
    for filename, (attr, record_cls) in TABLE_FILES.items():
        loaded[attr] = _load_table(directory / filename, record_cls)
    return validate(ClinicalTables(**loaded))


def save_tables(tables: ClinicalTables, directory_path: str | os.PathLike) -> None:
    """Write the seven CSV files so that load_tables reproduces ``tables`` exactly."""
    directory = Path(directory_path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for filename, (attr, record_cls) in TABLE_FILES.items():
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow([f.name for f in fields(record_cls)])
            for row in getattr(tables, attr):
                writer.writerow([_field_to_text(getattr(row, f.name)) for f in fields(record_cls)])
            (directory / filename).write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {directory}: {exc}") from exc
