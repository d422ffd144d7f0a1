"""Deterministic synthetic clinical dataset generator.

Row counts default to the shipped reference dataset shape (seven tables,
23,963 rows total). Generation is a pure function of :class:`GenSpec`: the
same spec always yields byte-identical tables. Randomness comes from a
SplitMix64 stream per table, seeded from SHA-256(seed, table-name), so
changing one table's row count never perturbs another table. A hand-rolled
generator (rather than ``random`` / numpy) keeps the streams stable across
interpreter and library versions, which the golden tests rely on.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import date, timedelta

from .errors import InconsistentSpec
from .records import (
    ClinicalDetectionRecord,
    ClinicalTables,
    DoctorRecord,
    ExaminationRecord,
    MedicationRecord,
    PatientRecord,
    PrescriptionRecord,
    PrescriptMedRecord,
)

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Minimal 64-bit PRNG with a fixed, portable output stream."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK64 - (_MASK64 + 1) % n
        while True:
            v = self.next_u64()
            if v <= limit:
                return v % n

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi], both ends inclusive."""
        return lo + self.randbelow(hi - lo + 1)

    def choice(self, seq):
        return seq[self.randbelow(len(seq))]

    def chance(self, percent: int) -> bool:
        """True with probability percent/100."""
        return self.randbelow(100) < percent

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


def _stream(seed: int, table: str) -> SplitMix64:
    digest = hashlib.sha256(f"{seed}:{table}".encode("utf-8")).digest()
    return SplitMix64(int.from_bytes(digest[:8], "big"))


# Pools are versioned data constants: golden outputs depend on their exact
# contents and order. Append only; never reorder.

FIRST_NAMES = (
    "Adena", "Buffy", "Kaye", "Keiko", "Kylynn", "Daquan", "Rebekah", "Zane",
    "Jennifer", "Marek", "Ilse", "Tomas", "Priya", "Otto", "Salma", "Viggo",
    "Nadia", "Ewan", "Carmen", "Bogdan", "Ayla", "Ruben", "Ines", "Dmitri",
)

SURNAMES = (
    "Reeves", "Warner", "Green", "Gonzalez", "Carver", "Sosa", "Navarro",
    "Benson", "Petty", "Quintero", "Ibarra", "Holm", "Varga", "Castellanos",
    "Pires", "Melnik", "Oyelaran", "Strand", "Kovacs", "Almeida",
)

COUNTRIES = (
    "Montenegro", "Guinea-Bissau", "Norway", "Iraq", "Tanzania",
    "Saudi Arabia", "Mauritania", "Isle of Man", "Hungary", "Austria",
    "Belgium", "Chile", "Denmark", "Ecuador", "Finland", "Ghana", "Iceland",
    "Jordan", "Kenya", "Latvia", "Morocco", "Nepal", "Oman", "Peru", "Qatar",
    "Senegal", "Tunisia", "Uruguay", "Vietnam", "Zambia",
)

CITIES = (
    "Morkhoven", "Graz", "Bojano", "Oberhausen", "Wolvertem", "Bathurst",
    "Esbjerg", "Cuenca", "Tartu", "Kumasi", "Akureyri", "Irbid", "Nakuru",
    "Liepaja", "Agadir", "Pokhara", "Salalah", "Arequipa", "Sousse",
    "Paysandu", "Dufttown", "Eberswalde",
)

STREET_WORDS = (
    "Aptent", "Nunc", "Tellus", "Magna", "Mauris", "Ornare", "Lorem",
    "Vitae", "Fusce", "Auctor", "Dolor", "Sapien",
)

STREET_SUFFIXES = ("St.", "Ave", "Rd.", "Avenue", "Street")

DIAGNOSES = (
    "Colon: Primary malignant tumor, Quiescent Crohn's disease",
    "Esophagus: Normal, Ectopic gastric mucosa",
    "Esophagus: Reflux esophagitis",
    "Esophagus: Varices certain",
    "Esophagus: Barrett's esophagus",
    "Stomach: Erosive gastritis, Helicobacter pylori",
    "Stomach: Gastric ulcer",
    "Duodenum: Duodenitis, Erosion",
    "Colon: Polyp, Diverticulosis",
    "Rectum: Internal hemorrhoids",
    "Colon: Ulcerative colitis, Active",
    "Stomach: Normal",
)

DOCTOR_GIVEN = (
    "Tom", "Anna", "Lars", "Mei", "Omar", "Sofia", "Henrik", "Amara",
    "Pavel", "Lucia", "Kofi", "Elsa", "Mateo", "Ingrid", "Yusuf", "Greta",
)

DOCTOR_FAMILY = (
    "Baker", "Fischer", "Rossi", "Tanaka", "Novak", "Silva", "Haugen",
    "Okafor", "Duval", "Lindqvist", "Moreau", "Keller", "Santos", "Vogel",
)

MEDICATION_PREFIXES = (
    "Abi", "Cor", "Dol", "Neu", "Vel", "Zan", "Mor", "Tri", "Oxi", "Lum",
    "Pra", "Fen",
)

MEDICATION_SUFFIXES = (
    "lify", "taren", "vex", "zole", "pril", "statin", "mab", "dine",
    "parin", "formin",
)

MEDICATION_POOL = tuple(
    p + s for p in MEDICATION_PREFIXES for s in MEDICATION_SUFFIXES
)

# Reference dataset row counts for the seven tables.
DEFAULT_ROWS_PATIENT = 1881
DEFAULT_ROWS_EXAMINATION = 2020
DEFAULT_ROWS_CLINICALDETECTION = 6393
DEFAULT_ROWS_DOCTOR = 912
DEFAULT_ROWS_PRESCRIPTION = 3856
DEFAULT_ROWS_MEDICATION = 100
DEFAULT_ROWS_PRESCRIPTMED = 8801

# Age brackets (inclusive year ranges) used to stratify dates of birth.
_AGE_BRACKETS = ((0, 17), (18, 39), (40, 59), (60, 95))


@dataclass(frozen=True)
class GenSpec:
    seed: int = 0
    rows_patient: int = DEFAULT_ROWS_PATIENT
    rows_examination: int = DEFAULT_ROWS_EXAMINATION
    rows_clinicaldetection: int = DEFAULT_ROWS_CLINICALDETECTION
    rows_doctor: int = DEFAULT_ROWS_DOCTOR
    rows_prescription: int = DEFAULT_ROWS_PRESCRIPTION
    rows_medication: int = DEFAULT_ROWS_MEDICATION
    rows_prescriptmed: int = DEFAULT_ROWS_PRESCRIPTMED
    reference_date: date = date(2018, 1, 1)
    date_window_start: date = date(2008, 1, 1)
    date_window_end: date = date(2017, 12, 31)


def _check_spec(spec: GenSpec) -> None:
    counts = (
        spec.rows_patient, spec.rows_examination, spec.rows_clinicaldetection,
        spec.rows_doctor, spec.rows_prescription, spec.rows_medication,
        spec.rows_prescriptmed,
    )
    if any(c < 0 for c in counts):
        raise InconsistentSpec("row counts must be non-negative")
    if not (spec.date_window_start <= spec.date_window_end <= spec.reference_date):
        raise InconsistentSpec("require date_window_start <= date_window_end <= reference_date")
    if spec.rows_examination > 0 and spec.rows_patient == 0:
        raise InconsistentSpec("examinations require patients")
    if spec.rows_clinicaldetection > 0 and spec.rows_patient == 0:
        raise InconsistentSpec("clinical detections require patients")
    if spec.rows_prescription > 0 and (spec.rows_patient == 0 or spec.rows_doctor == 0):
        raise InconsistentSpec("prescriptions require patients and doctors")
    if spec.rows_prescriptmed > 0 and (spec.rows_prescription == 0 or spec.rows_medication == 0):
        raise InconsistentSpec("prescriptmed links require prescriptions and medications")
    if spec.rows_prescriptmed > spec.rows_prescription * spec.rows_medication:
        raise InconsistentSpec("more prescriptmed links than distinct pairs exist")


def _subtract_years(d: date, years: int) -> date:
    try:
        return d.replace(year=d.year - years)
    except ValueError:  # Feb 29 source, non-leap target
        return d.replace(year=d.year - years, day=28)


def _date_in(rng: SplitMix64, start: date, end: date) -> date:
    return start + timedelta(days=rng.randbelow((end - start).days + 1))


def _make_dob(rng: SplitMix64, reference: date, bracket: int) -> date:
    lo, hi = _AGE_BRACKETS[bracket]
    age = rng.randint(lo, hi)
    # any day in (ref - (age+1) years, ref - age years] leaves the age exact
    return _subtract_years(reference, age) - timedelta(days=rng.randbelow(365))


def _make_street(rng: SplitMix64) -> str:
    word = rng.choice(STREET_WORDS)
    suffix = rng.choice(STREET_SUFFIXES)
    kind = rng.randbelow(3)
    if kind == 0:
        return f"P.O. Box {rng.randint(100, 999)}, {rng.randint(1000, 9999)} {word} {suffix}"
    if kind == 1:
        return f"Ap #{rng.randint(100, 999)}-{rng.randint(1000, 9999)} {word} {suffix}"
    return f"{rng.randint(100, 9999)} {word} {suffix}"


def _make_postal(rng: SplitMix64) -> str:
    # always contains a letter or dash so a postal can never collide with a
    # purely numeric aggregate value
    kind = rng.randbelow(3)
    if kind == 0:
        return f"{rng.randint(10000, 99999)}-{rng.randint(100, 999)}"
    if kind == 1:
        letters = "ABCDEFGHJKLMNPRSTUVWXYZ"
        return (f"{rng.choice(letters)}{rng.randint(10, 99)} "
                f"{rng.randint(1, 9)}{rng.choice(letters)}{rng.choice(letters)}")
    return f"{rng.randint(1000, 9999)}{rng.choice('ABCDEFGHJKLMNPRSTUVWXYZ')}R"


def _gen_patients(spec: GenSpec) -> tuple[PatientRecord, ...]:
    rng = _stream(spec.seed, "patient")
    rows = []
    for i in range(spec.rows_patient):
        # first two rows pin both genders, first four pin all age brackets,
        # so small datasets still exercise every query path
        gender = ("F", "M")[i] if i < 2 else rng.choice(("F", "M"))
        bracket = i if i < 4 else rng.randbelow(4)
        rows.append(PatientRecord(
            pid=10000 + i,
            name=rng.choice(FIRST_NAMES),
            surname=rng.choice(SURNAMES),
            gender=gender,
            dob=_make_dob(rng, spec.reference_date, bracket),
            country=rng.choice(COUNTRIES),
            street_address=_make_street(rng),
            city=rng.choice(CITIES),
            postal=_make_postal(rng),
        ))
    return tuple(rows)


def _gen_examinations(spec: GenSpec, pids: tuple[int, ...]) -> tuple[ExaminationRecord, ...]:
    rng = _stream(spec.seed, "examination")
    return tuple(
        ExaminationRecord(
            report_id=20000 + i,
            patient_id=rng.choice(pids),
            endoscopy_date=_date_in(rng, spec.date_window_start, spec.date_window_end),
            diagnoses_text=rng.choice(DIAGNOSES),
        )
        for i in range(spec.rows_examination)
    )


def _gen_detections(spec: GenSpec, pids: tuple[int, ...]) -> tuple[ClinicalDetectionRecord, ...]:
    rng = _stream(spec.seed, "clinicaldetection")
    rows: list[ClinicalDetectionRecord] = []
    cursor = 0
    while len(rows) < spec.rows_clinicaldetection:
        patient = pids[cursor % len(pids)]
        cursor += 1
        # ~20% of sequences run the full three-visit schedule
        visits = 3 if rng.chance(20) else rng.randint(1, 2)
        first = _date_in(rng, spec.date_window_start, spec.date_window_end)
        for t in range(1, visits + 1):
            if len(rows) == spec.rows_clinicaldetection:
                break
            visit_date = min(first + timedelta(days=90 * (t - 1)), spec.date_window_end)
            rows.append(ClinicalDetectionRecord(
                detection_id=30000 + len(rows),
                patient_id=patient,
                times=t,
                hbsag=rng.randbelow(2),
                antihbs=rng.randbelow(2),
                detection_date=visit_date,
            ))
    return tuple(rows)


def _gen_doctors(spec: GenSpec) -> tuple[DoctorRecord, ...]:
    rng = _stream(spec.seed, "doctor")
    return tuple(
        DoctorRecord(
            doctor_id=1000 + i,
            given_name=rng.choice(DOCTOR_GIVEN),
            family_name=rng.choice(DOCTOR_FAMILY),
        )
        for i in range(spec.rows_doctor)
    )


def _gen_prescriptions(spec: GenSpec, pids, doctor_ids) -> tuple[PrescriptionRecord, ...]:
    rng = _stream(spec.seed, "prescription")
    return tuple(
        PrescriptionRecord(
            prescription_id=40000 + i,
            patient_id=rng.choice(pids),
            doctor_id=rng.choice(doctor_ids),
            prescription_date=_date_in(rng, spec.date_window_start, spec.date_window_end),
        )
        for i in range(spec.rows_prescription)
    )


def _gen_medications(spec: GenSpec) -> tuple[MedicationRecord, ...]:
    rng = _stream(spec.seed, "medication")
    names = list(MEDICATION_POOL)
    rng.shuffle(names)
    if spec.rows_medication > len(names):
        extra = [
            f"{names[i % len(MEDICATION_POOL)]}-{i // len(MEDICATION_POOL)}"
            for i in range(len(names), spec.rows_medication)
        ]
        names.extend(extra)
    return tuple(
        MedicationRecord(medication_id=600 + i, medication_name=names[i])
        for i in range(spec.rows_medication)
    )


def _gen_prescript_meds(spec: GenSpec, rx_ids, med_ids) -> tuple[PrescriptMedRecord, ...]:
    rng = _stream(spec.seed, "prescriptmed")
    total = len(rx_ids) * len(med_ids)
    n = spec.rows_prescriptmed
    if n > total // 2:
        pairs = [(r, m) for r in rx_ids for m in med_ids]
        rng.shuffle(pairs)
        chosen = pairs[:n]
    else:
        seen = set()
        chosen = []
        while len(chosen) < n:
            pair = (rng.choice(rx_ids), rng.choice(med_ids))
            if pair not in seen:
                seen.add(pair)
                chosen.append(pair)
    return tuple(PrescriptMedRecord(prescription_id=r, medication_id=m) for r, m in chosen)


def generate_dataset(spec: GenSpec) -> ClinicalTables:
    """Generate the full seven-table dataset for ``spec`` deterministically."""
    _check_spec(spec)
    patients = _gen_patients(spec)
    pids = tuple(p.pid for p in patients)
    doctors = _gen_doctors(spec)
    doctor_ids = tuple(d.doctor_id for d in doctors)
    medications = _gen_medications(spec)
    med_ids = tuple(m.medication_id for m in medications)
    prescriptions = _gen_prescriptions(spec, pids, doctor_ids)
    rx_ids = tuple(p.prescription_id for p in prescriptions)
    return ClinicalTables(
        patients=patients,
        examinations=_gen_examinations(spec, pids),
        clinical_detections=_gen_detections(spec, pids),
        doctors=doctors,
        prescriptions=prescriptions,
        medications=medications,
        prescript_meds=_gen_prescript_meds(spec, rx_ids, med_ids),
    )
