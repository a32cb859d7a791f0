"""Synthetic corpus generator with known ground truth.

Produces an input file in the ingest line format plus the quantities a
pipeline run should recover: per-document branch, yearly branch
proportions, per-branch regional credit shares and the analytic
expectation of the group-average dependency. Documents of the first year
cite nothing (they are the citation roots); every later document cites
only previous-year documents, which makes the expected dependency of
each year's papers an exact linear recursion in the mix ratio.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .coclustering import APPLIED, THEORY

# Branch-specific and shared vocabulary. Stems are pairwise distinct and
# none of them is a stopword, so the planted structure survives the token
# pipeline intact ("graphene" is in every document on purpose: a word with
# degenerate global frequency that keyword ranking must skip).
THEORY_WORDS = (
    "dirac", "fermion", "lattice", "hamiltonian", "bandgap", "spin",
    "orbit", "quantum", "tunneling", "phonon", "exciton", "topological",
    "valley", "hexagonal", "symmetry", "relativistic", "dispersion",
    "chirality", "landau", "plasmon", "soliton", "superlattice",
    "massless", "helical", "honeycomb", "magnon", "polariton", "gauge",
    "renormalization", "pseudospin",
)
APPLIED_WORDS = (
    "electrode", "supercapacitor", "battery", "lithium", "anode",
    "cathode", "electrolyte", "sensor", "biosensor", "composite",
    "coating", "membrane", "catalyst", "photocatalyst", "adsorption",
    "nanocomposite", "oxidation", "synthesis", "hydrothermal",
    "exfoliation", "capacitance", "cycling", "flexible",
    "electrochemical", "aqueous", "nanosheet", "ink", "slurry",
    "binder", "separator",
)
SHARED_WORDS = (
    "graphene", "carbon", "material", "layer", "film", "property",
    "structure", "surface", "measurement", "temperature", "device",
    "effect", "energy", "method", "sample", "analysis", "process",
    "performance", "experiment", "model",
)

THEORY_REGIONS = {"US": 0.30, "CN": 0.20, "DE": 0.15, "GB": 0.13, "JP": 0.12, "SG": 0.10}
APPLIED_REGIONS = {"CN": 0.45, "KR": 0.18, "US": 0.12, "IN": 0.10, "IR": 0.08, "SG": 0.07}

_COUNTRY_NAMES = {
    "US": "United States", "CN": "China", "DE": "Germany", "GB": "England",
    "JP": "Japan", "SG": "Singapore", "KR": "South Korea", "IN": "India",
    "IR": "Iran",
}


@dataclass(frozen=True)
class GeneratorParams:
    n_docs: int = 5000
    year_min: int = 2004
    year_max: int = 2016
    theory_share_start: float = 0.7
    theory_share_end: float = 0.3
    cite_theory_from_theory: float = 0.8
    cite_theory_from_applied: float = 0.35
    refs_min: int = 3
    refs_max: int = 8
    collab_prob: float = 0.2
    n_review_records: int = 150
    n_missing_doi_records: int = 100
    external_ref_prob: float = 0.1


@dataclass
class GeneratorTruth:
    """Ground truth the pipeline is expected to recover."""

    params: GeneratorParams
    branch_by_id: dict[str, str]
    year_by_id: dict[str, int]
    yearly_counts: dict[int, dict[str, int]] = field(default_factory=dict)
    region_credit: dict[str, dict[str, float]] = field(default_factory=dict)

    def yearly_theory_share(self) -> dict[int, float]:
        shares = {}
        for year, counts in sorted(self.yearly_counts.items()):
            total = counts.get(THEORY, 0) + counts.get(APPLIED, 0)
            if total:
                shares[year] = counts.get(THEORY, 0) / total
        return shares

    def region_shares(self, branch: str) -> dict[str, float]:
        credit = self.region_credit.get(branch, {})
        total = sum(credit.values())
        return {region: c / total for region, c in credit.items()} if total else {}

    def to_json(self) -> str:
        payload = {
            "branch_by_id": self.branch_by_id,
            "year_by_id": self.year_by_id,
            "yearly_counts": {str(y): c for y, c in sorted(self.yearly_counts.items())},
            "yearly_theory_share": {
                str(y): s for y, s in self.yearly_theory_share().items()
            },
            "region_shares": {b: self.region_shares(b) for b in (THEORY, APPLIED)},
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1)


def expected_group_dependency(truth: GeneratorTruth, r: float) -> dict[str, float]:
    """Analytic expectation of the group-mean overall theory-dependency.

    Papers of year y cite uniformly into year y-1 with branch mix a (T
    citers) and b (A citers). With e_T(y), e_A(y) the expected effective
    contribution of a year-y reference of each branch (the branch
    indicator for root years, the expected overall value otherwise), the
    expected overall value of a year-(y+1) paper follows one linear step.
    Group means weight each year's expectation by the realized counts.
    """
    p = truth.params
    a = p.cite_theory_from_theory
    b = p.cite_theory_from_applied
    eff_t, eff_a = 1.0, 0.0  # effective contribution of first-year (root) refs
    num = {THEORY: 0.0, APPLIED: 0.0}
    den = {THEORY: 0, APPLIED: 0}
    for year in range(p.year_min + 1, p.year_max + 1):
        x = r * a + (1.0 - r) * (a * eff_t + (1.0 - a) * eff_a)
        y = r * b + (1.0 - r) * (b * eff_t + (1.0 - b) * eff_a)
        counts = truth.yearly_counts.get(year, {})
        num[THEORY] += counts.get(THEORY, 0) * x
        den[THEORY] += counts.get(THEORY, 0)
        num[APPLIED] += counts.get(APPLIED, 0) * y
        den[APPLIED] += counts.get(APPLIED, 0)
        eff_t, eff_a = x, y
    return {g: num[g] / den[g] for g in (THEORY, APPLIED) if den[g]}


def _year_counts(params: GeneratorParams) -> dict[int, int]:
    """Deterministic per-year document counts growing linearly 1x to 3x."""
    years = list(range(params.year_min, params.year_max + 1))
    weights = np.linspace(1.0, 3.0, len(years))
    raw = weights / weights.sum() * params.n_docs
    counts = np.floor(raw).astype(int)
    remainder = params.n_docs - counts.sum()
    order = np.argsort(-(raw - counts))
    for i in order[:remainder]:
        counts[i] += 1
    return dict(zip(years, counts.tolist()))


def _theory_prob(params: GeneratorParams, year: int) -> float:
    span = max(1, params.year_max - params.year_min)
    t = (year - params.year_min) / span
    return params.theory_share_start + t * (
        params.theory_share_end - params.theory_share_start
    )


def _draw_region(rng: np.random.Generator, branch: str) -> str:
    dist = THEORY_REGIONS if branch == THEORY else APPLIED_REGIONS
    regions = list(dist)
    probs = np.array([dist[k] for k in regions])
    return regions[rng.choice(len(regions), p=probs / probs.sum())]


def _make_text(rng: np.random.Generator, branch: str) -> tuple[str, str]:
    own = THEORY_WORDS if branch == THEORY else APPLIED_WORDS
    other = APPLIED_WORDS if branch == THEORY else THEORY_WORDS
    words = ["graphene"]
    words += list(rng.choice(own, size=12))
    words += list(rng.choice(SHARED_WORDS, size=6))
    if rng.random() < 0.3:
        words.append(str(rng.choice(other)))
    title_words = words[:6]
    body = list(words[6:])
    rng.shuffle(body)
    return " ".join(title_words), " ".join(body)


def _make_authors(rng: np.random.Generator, branch: str,
                  params: GeneratorParams) -> list[dict]:
    n_authors = 2 if rng.random() < params.collab_prob else 1
    authors = []
    for i in range(n_authors):
        region = _draw_region(rng, branch)
        authors.append(
            {
                "name": f"Author {rng.integers(0, 10_000_000)}",
                "affiliations": [
                    {"raw": f"Institute {int(rng.integers(1, 400))}, "
                            f"{_COUNTRY_NAMES[region]}"}
                ],
            }
        )
    return authors


def _region_of(author: dict) -> str:
    raw = author["affiliations"][0]["raw"]
    country = raw.split(", ")[-1]
    for code, name in _COUNTRY_NAMES.items():
        if name == country:
            return code
    raise ValueError(f"unmapped country in {raw!r}")


def generate(params: GeneratorParams = GeneratorParams(),
             seed: int = 0) -> tuple[list[str], GeneratorTruth]:
    """Build input lines plus ground truth; fully determined by the seed."""
    rng = np.random.default_rng(seed)
    truth = GeneratorTruth(params=params, branch_by_id={}, year_by_id={})
    year_counts = _year_counts(params)

    by_year_branch: dict[tuple[int, str], list[dict]] = {}
    docs: list[dict] = []
    serial = 0
    for year in range(params.year_min, params.year_max + 1):
        p_t = _theory_prob(params, year)
        for _ in range(year_counts[year]):
            serial += 1
            branch = THEORY if rng.random() < p_t else APPLIED
            doc_id = f"S{serial:06d}"
            title, abstract = _make_text(rng, branch)
            doc = {
                "id": doc_id,
                "doi": f"10.5555/{doc_id.lower()}",
                "title": title,
                "abstract": abstract,
                "year": year,
                "doc_type": "Article",
                "authors": _make_authors(rng, branch, params),
                "references": [],
            }
            docs.append(doc)
            by_year_branch.setdefault((year, branch), []).append(doc)
            truth.branch_by_id[doc_id] = branch
            truth.year_by_id[doc_id] = year
            year_stats = truth.yearly_counts.setdefault(year, {})
            year_stats[branch] = year_stats.get(branch, 0) + 1

    # Citations: previous-year targets only, branch mix per citer branch,
    # sampled without replacement so the direct proportion is binomial.
    for doc in docs:
        year = doc["year"]
        if year == params.year_min:
            continue
        branch = truth.branch_by_id[doc["id"]]
        p_theory_ref = (
            params.cite_theory_from_theory
            if branch == THEORY
            else params.cite_theory_from_applied
        )
        n_refs = int(rng.integers(params.refs_min, params.refs_max + 1))
        n_theory = int(rng.binomial(n_refs, p_theory_ref))
        refs = []
        for target_branch, count in ((THEORY, n_theory), (APPLIED, n_refs - n_theory)):
            pool = by_year_branch.get((year - 1, target_branch), [])
            if not pool:
                pool = by_year_branch.get(
                    (year - 1, APPLIED if target_branch == THEORY else THEORY), []
                )
            take = min(count, len(pool))
            for idx in rng.choice(len(pool), size=take, replace=False):
                target = pool[int(idx)]
                # exercise both reference resolution paths
                refs.append(target["doi"] if rng.random() < 0.5 else target["id"])
        if rng.random() < params.external_ref_prob:
            refs.append(f"10.9999/external-{int(rng.integers(0, 10**6))}")
        rng.shuffle(refs)
        doc["references"] = refs

    # Realized regional credit per true branch (even author/affiliation split).
    for doc in docs:
        branch = truth.branch_by_id[doc["id"]]
        bucket = truth.region_credit.setdefault(branch, {})
        share = Fraction(1, len(doc["authors"]))
        for author in doc["authors"]:
            region = _region_of(author)
            bucket[region] = bucket.get(region, 0.0) + float(share)

    # Records the filter must drop, interleaved with the real ones.
    extras: list[dict] = []
    for i in range(params.n_review_records):
        extras.append(
            {
                "id": f"R{i:06d}",
                "doi": f"10.5555/review-{i}",
                "title": "graphene review " + " ".join(rng.choice(SHARED_WORDS, size=3)),
                "abstract": "survey of recent progress",
                "year": int(rng.integers(params.year_min, params.year_max + 1)),
                "doc_type": "Review",
                "authors": [],
                "references": [],
            }
        )
    for i in range(params.n_missing_doi_records):
        extras.append(
            {
                "id": f"N{i:06d}",
                "doi": None,
                "title": "graphene note " + " ".join(rng.choice(SHARED_WORDS, size=3)),
                "abstract": "",
                "year": int(rng.integers(params.year_min, params.year_max + 1)),
                "doc_type": "Article",
                "authors": [],
                "references": [],
            }
        )

    everything = docs + extras
    order = rng.permutation(len(everything))
    lines = [
        json.dumps(everything[int(i)], ensure_ascii=False, sort_keys=True)
        for i in order
    ]
    return lines, truth


def write_corpus(path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
