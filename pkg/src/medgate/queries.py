"""Stored-query registry and evaluator.

Only pre-registered aggregate queries can execute. A query's plan is a
compiled, typed evaluator over the in-memory tables — parameters are bound
as values, never interpolated into any query text, so harmful input cannot
reach anything executable. Every raw parameter passes both input guards at
bind time, before type validation, so injection-shaped strings are rejected
as blocked input rather than as format errors.

Age bracket semantics: age is the number of whole years attained at the
configured reference date (a birthday on the reference date counts as
attained; Feb 29 birthdays are attained on Mar 1 in non-leap years), and the
brackets are the disjoint half-open ranges [0,18), [18,40), [40,60), [60,∞).
Date windows are inclusive on both ends. Top-5 queries break count ties by
ascending label.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Mapping

from .errors import (
    BadParamFormat,
    BlockedInput,
    BlockedOutputColumn,
    DuplicateQueryId,
    MissingParam,
    UnknownQuery,
)
from .guard import GuardConfig, check_deidentification, check_injection
from .records import ClinicalTables, parse_iso_date

DEFAULT_REFERENCE_DATE = date(2018, 1, 1)

PARAM_KINDS = ("date", "country_text", "medication_text", "doctor_name_text", "positive_int")


@dataclass(frozen=True)
class QueryContext:
    reference_date: date = DEFAULT_REFERENCE_DATE


@dataclass(frozen=True)
class ResultSet:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]


PlanFn = Callable[[ClinicalTables, Mapping, QueryContext], list[tuple]]


@dataclass(frozen=True)
class QueryDefinition:
    query_id: str
    description: str
    params: tuple[tuple[str, str], ...]  # (param_name, param_kind)
    output_columns: tuple[str, ...]
    plan: PlanFn = field(repr=False)
    aggregate_only: bool = True


@dataclass(frozen=True)
class BoundQuery:
    definition: QueryDefinition
    bindings: Mapping


class QueryRegistry:
    """Registration-ordered whitelist of executable query definitions."""

    def __init__(self, guard_cfg: GuardConfig = GuardConfig()):
        self._guard_cfg = guard_cfg
        self._defs: dict[str, QueryDefinition] = {}

    def register(self, defn: QueryDefinition) -> str:
        if defn.query_id in self._defs:
            raise DuplicateQueryId(f"query {defn.query_id!r} already registered")
        for label in defn.output_columns:
            if not check_deidentification(label, self._guard_cfg):
                raise BlockedOutputColumn(label)
        if not check_deidentification(defn.description, self._guard_cfg):
            raise BlockedOutputColumn("<description>")
        self._defs[defn.query_id] = defn
        return defn.query_id

    def get(self, query_id: str) -> QueryDefinition:
        try:
            return self._defs[query_id]
        except KeyError:
            raise UnknownQuery(f"unknown query {query_id!r}") from None

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._defs

    def query_ids(self) -> tuple[str, ...]:
        return tuple(self._defs)

    def definitions(self) -> tuple[QueryDefinition, ...]:
        return tuple(self._defs.values())


# --- parameter binding ---------------------------------------------------------


def _validate_date(name: str, raw: str) -> date:
    try:
        return parse_iso_date(raw)
    except ValueError:
        raise BadParamFormat(name, f"expected YYYY-MM-DD, got {raw!r}") from None


def _validate_text(name: str, raw: str) -> str:
    if not raw.strip():
        raise BadParamFormat(name, "must be non-empty")
    return raw


def _validate_positive_int(name: str, raw: str) -> int:
    if not raw.isdigit() or int(raw) < 1:
        raise BadParamFormat(name, f"expected a positive integer, got {raw!r}")
    return int(raw)


_VALIDATORS = {
    "date": _validate_date,
    "country_text": _validate_text,
    "medication_text": _validate_text,
    "doctor_name_text": _validate_text,
    "positive_int": _validate_positive_int,
}


def bind(registry: QueryRegistry, query_id: str, raw_params: Mapping[str, str],
         guard_cfg: GuardConfig = GuardConfig()) -> BoundQuery:
    """Validate raw parameters against the schema: guards first, then typing."""
    defn = registry.get(query_id)
    bindings = {}
    for name, kind in defn.params:
        if name not in raw_params:
            raise MissingParam(name)
        raw = raw_params[name]
        if not check_deidentification(raw, guard_cfg):
            raise BlockedInput(name, "deidentification")
        if not check_injection(raw, guard_cfg):
            raise BlockedInput(name, "injection")
        bindings[name] = _VALIDATORS[kind](name, raw)
    return BoundQuery(definition=defn, bindings=bindings)


def execute(bound: BoundQuery, tables: ClinicalTables,
            ctx: QueryContext = QueryContext()) -> ResultSet:
    rows = bound.definition.plan(tables, bound.bindings, ctx)
    columns = bound.definition.output_columns
    for row in rows:
        if len(row) != len(columns):
            raise AssertionError(f"plan row width {len(row)} != {len(columns)}")
    return ResultSet(columns=columns, rows=tuple(tuple(r) for r in rows))


# --- shared plan helpers ---------------------------------------------------------


def age_on(dob: date, reference: date) -> int:
    """Whole years attained at the reference date."""
    years = reference.year - dob.year
    if (reference.month, reference.day) < (dob.month, dob.day):
        years -= 1
    return years


def bracket_counts(dobs, reference: date) -> tuple[int, int, int, int]:
    counts = [0, 0, 0, 0]
    for dob in dobs:
        age = age_on(dob, reference)
        if age < 18:
            counts[0] += 1
        elif age < 40:
            counts[1] += 1
        elif age < 60:
            counts[2] += 1
        else:
            counts[3] += 1
    return tuple(counts)


def _top5(counter: Counter) -> list[tuple]:
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(label, n) for label, n in ranked[:5] if n > 0]


# --- canonical plans -------------------------------------------------------------


def _plan_exam_by_country(tables, b, ctx):
    country_of = {p.pid: p.country for p in tables.patients}
    counts = Counter()
    for e in tables.examinations:
        if b["start"] <= e.endoscopy_date <= b["end"]:
            counts[country_of[e.patient_id]] += 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def _plan_top5_diagnoses(tables, b, ctx):
    counts = Counter()
    for e in tables.examinations:
        if b["start"] <= e.endoscopy_date <= b["end"]:
            counts[e.diagnoses_text] += 1
    return _top5(counts)


def _plan_age_profile(tables, b, ctx):
    examined = {
        e.patient_id for e in tables.examinations
        if b["start"] <= e.endoscopy_date <= b["end"]
    }
    dobs = [p.dob for p in tables.patients if p.pid in examined]
    return [bracket_counts(dobs, ctx.reference_date)]


def _plan_hepb_by_gender(tables, b, ctx):
    baseline_negative = {
        d.patient_id for d in tables.clinical_detections
        if d.times == 1 and d.hbsag == 0
    }
    followup_negative = {
        d.patient_id for d in tables.clinical_detections
        if d.times == 3 and d.antihbs == 0
    }
    susceptible = baseline_negative & followup_negative
    counts = Counter(p.gender for p in tables.patients if p.pid in susceptible)
    return sorted(counts.items())


def _plan_total_prescriptions(tables, b, ctx):
    total = sum(
        1 for p in tables.prescriptions
        if b["start"] <= p.prescription_date <= b["end"]
    )
    return [(total,)]


def _plan_patients_by_doctor(tables, b, ctx):
    matching = {
        d.doctor_id for d in tables.doctors
        if f"{d.given_name} {d.family_name}" == b["doctor_name"]
    }
    patients = {
        p.patient_id for p in tables.prescriptions
        if p.doctor_id in matching and b["start"] <= p.prescription_date <= b["end"]
    }
    return [(len(patients),)]


def _plan_age_profile_medication(tables, b, ctx):
    med_ids = {
        m.medication_id for m in tables.medications
        if m.medication_name == b["medication"]
    }
    rx_with_med = {
        pm.prescription_id for pm in tables.prescript_meds
        if pm.medication_id in med_ids
    }
    patients = {
        p.patient_id for p in tables.prescriptions
        if p.prescription_id in rx_with_med
        and b["start"] <= p.prescription_date <= b["end"]
    }
    dob_of = {p.pid: p.dob for p in tables.patients}
    return [bracket_counts((dob_of[pid] for pid in patients), ctx.reference_date)]


def _plan_top5_medications(tables, b, ctx):
    patient_of_rx = {
        p.prescription_id: p.patient_id for p in tables.prescriptions
        if b["start"] <= p.prescription_date <= b["end"]
    }
    name_of = {m.medication_id: m.medication_name for m in tables.medications}
    patients_per_med: dict[str, set] = {}
    for pm in tables.prescript_meds:
        patient = patient_of_rx.get(pm.prescription_id)
        if patient is not None:
            patients_per_med.setdefault(name_of[pm.medication_id], set()).add(patient)
    counts = Counter({name: len(pats) for name, pats in patients_per_med.items()})
    return _top5(counts)


_BRACKET_COLUMNS = ("NumBelow18", "Num18ToBelow40", "Num40ToBelow60", "Num60AndAbove")

_DATE_WINDOW = (("start", "date"), ("end", "date"))


def canonical_catalog() -> list[QueryDefinition]:
    """The eight registered aggregate queries, in catalog order."""
    return [
        QueryDefinition(
            query_id="q1_exam_by_country",
            description="Total number of endoscopic examinations per country within a date window.",
            params=_DATE_WINDOW,
            output_columns=("Country", "TotalNum"),
            plan=_plan_exam_by_country,
        ),
        QueryDefinition(
            query_id="q2_top5_diagnoses",
            description="Top 5 diagnoses among endoscopic examinations within a date window, with case counts.",
            params=_DATE_WINDOW,
            output_columns=("DiagnosesText", "Number"),
            plan=_plan_top5_diagnoses,
        ),
        QueryDefinition(
            query_id="q3_age_profile",
            description=("Distinct patients with an endoscopic examination in a date window, "
                         "counted in four brackets by years since birth."),
            params=_DATE_WINDOW,
            output_columns=_BRACKET_COLUMNS,
            plan=_plan_age_profile,
        ),
        QueryDefinition(
            query_id="q4_hepb_susceptible_by_gender",
            description=("Patients per gender still susceptible to hepatitis B after the full "
                         "vaccination schedule (HBsAg negative at visit 1, Anti-HBs negative at visit 3)."),
            params=(),
            output_columns=("Gender", "NumberOfPatients"),
            plan=_plan_hepb_by_gender,
        ),
        QueryDefinition(
            query_id="q5_total_prescriptions",
            description="Total number of prescriptions issued within a date window.",
            params=_DATE_WINDOW,
            output_columns=("TotalPrescriptions",),
            plan=_plan_total_prescriptions,
        ),
        QueryDefinition(
            query_id="q6_patients_by_doctor",
            description="Distinct patients who received a prescription from a given doctor within a date window.",
            params=(("doctor_name", "doctor_name_text"),) + _DATE_WINDOW,
            output_columns=("NumberOfPatients",),
            plan=_plan_patients_by_doctor,
        ),
        QueryDefinition(
            query_id="q7_age_profile_medication",
            description=("Distinct patients who took a given medication within a date window, "
                         "counted in four brackets by years since birth."),
            params=(("medication", "medication_text"),) + _DATE_WINDOW,
            output_columns=_BRACKET_COLUMNS,
            plan=_plan_age_profile_medication,
        ),
        QueryDefinition(
            query_id="q8_top5_medications",
            description="Top 5 medications by number of distinct patients prescribed them within a date window.",
            params=_DATE_WINDOW,
            output_columns=("Medication", "NumberOfPatients"),
            plan=_plan_top5_medications,
        ),
    ]


# which resource service serves which query
HEALTH_RECORD_QUERIES = (
    "q1_exam_by_country", "q2_top5_diagnoses", "q3_age_profile",
    "q4_hepb_susceptible_by_gender",
)
MEDICAL_RECORD_QUERIES = (
    "q5_total_prescriptions", "q6_patients_by_doctor",
    "q7_age_profile_medication", "q8_top5_medications",
)

RESOURCE_OWNER = {qid: "health_record" for qid in HEALTH_RECORD_QUERIES}
RESOURCE_OWNER.update({qid: "medical_record" for qid in MEDICAL_RECORD_QUERIES})


def build_registry(definitions=None, guard_cfg: GuardConfig = GuardConfig()) -> QueryRegistry:
    registry = QueryRegistry(guard_cfg)
    for defn in definitions if definitions is not None else canonical_catalog():
        registry.register(defn)
    return registry
