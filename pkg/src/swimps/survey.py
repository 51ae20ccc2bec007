"""Likert survey scoring over the eight ISO/IEC 25010 characteristics.

Input is a CSV response sheet: first row item ids, second row the
characteristic each item belongs to, then one row of 1-5 integer
ratings per respondent. Means are rounded half-up to two decimals
before the verbal band lookup, and the overall score is the unweighted
mean of the characteristic means, rounded the same way.
"""

import csv
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

TWO_PLACES = Decimal("0.01")

# Verbal interpretation bands over the two-decimal grid [1.00, 5.00].
BANDS = (
    (Decimal("4.20"), Decimal("5.00"), "Excellent"),
    (Decimal("3.40"), Decimal("4.19"), "Very Good"),
    (Decimal("2.60"), Decimal("3.39"), "Good"),
    (Decimal("1.80"), Decimal("2.59"), "Fair"),
    (Decimal("1.00"), Decimal("1.79"), "Poor"),
)


class SurveyError(ValueError):
    pass


def round2(value: Decimal) -> Decimal:
    return value.quantize(TWO_PLACES, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class CharacteristicScore:
    characteristic: str
    mean: Decimal
    band: str


@dataclass(frozen=True)
class ScoreTable:
    rows: tuple[CharacteristicScore, ...]
    overall_mean: Decimal
    overall_band: str

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"characteristic": r.characteristic, "mean": float(r.mean),
                 "interpretation": r.band}
                for r in self.rows
            ],
            "overall": {"mean": float(self.overall_mean),
                        "interpretation": self.overall_band},
        }


class ResponseSheet:
    """Respondent x item ratings plus the item-to-characteristic map."""

    def __init__(self, item_ids: list[str], characteristics: list[str],
                 ratings: list[list[int]]):
        if len(item_ids) != len(characteristics):
            raise SurveyError("item and characteristic rows differ in length")
        if not item_ids:
            raise SurveyError("response sheet has no items")
        if not ratings:
            raise SurveyError("response sheet has no respondents")
        for i, row in enumerate(ratings):
            if len(row) != len(item_ids):
                raise SurveyError(
                    f"respondent row {i + 1} has {len(row)} ratings, expected {len(item_ids)}"
                )
            for value in row:
                if value not in (1, 2, 3, 4, 5):
                    raise SurveyError(f"rating {value} outside the 1-5 scale")
        self.item_ids = item_ids
        self.characteristics = characteristics
        self.ratings = ratings
        # Preserve first-appearance order; the output table mirrors it.
        self.characteristic_order: list[str] = []
        for name in characteristics:
            if name not in self.characteristic_order:
                self.characteristic_order.append(name)

    @classmethod
    def from_csv(cls, path: str | Path) -> "ResponseSheet":
        path = Path(path)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
        if len(rows) < 3:
            raise SurveyError(
                f"{path}: need an item row, a characteristic row and at least one respondent"
            )
        item_ids = [cell.strip() for cell in rows[0]]
        characteristics = [cell.strip() for cell in rows[1]]
        ratings = []
        for lineno, row in enumerate(rows[2:], start=3):
            try:
                ratings.append([int(cell) for cell in row])
            except ValueError as exc:
                raise SurveyError(f"{path}: line {lineno}: {exc}") from exc
        try:
            return cls(item_ids, characteristics, ratings)
        except SurveyError as exc:
            raise SurveyError(f"{path}: {exc}") from exc


def item_mean(sheet: ResponseSheet, characteristic: str) -> Decimal:
    """Mean of every rating under a characteristic, half-up to 2 dp."""
    columns = [i for i, name in enumerate(sheet.characteristics) if name == characteristic]
    if not columns:
        raise SurveyError(f"characteristic {characteristic!r} has no items")
    values = [row[i] for row in sheet.ratings for i in columns]
    return round2(Decimal(sum(values)) / Decimal(len(values)))


def interpret_band(mean: Decimal | float | str) -> str:
    """Verbal band for a two-decimal mean in [1.00, 5.00]."""
    value = round2(Decimal(str(mean)))
    for lo, hi, name in BANDS:
        if lo <= value <= hi:
            return name
    raise SurveyError(f"mean {value} outside [1.00, 5.00]")


def score_table(means: dict[str, Decimal]) -> ScoreTable:
    """Per-characteristic bands plus the overall mean-of-means."""
    if len(means) != 8:
        raise SurveyError(f"expected 8 characteristic means, got {len(means)}")
    rows = tuple(
        CharacteristicScore(characteristic=name, mean=round2(Decimal(str(m))),
                            band=interpret_band(m))
        for name, m in means.items()
    )
    overall = round2(sum((r.mean for r in rows), Decimal(0)) / Decimal(len(rows)))
    return ScoreTable(rows=rows, overall_mean=overall, overall_band=interpret_band(overall))


def score_sheet(sheet: ResponseSheet) -> ScoreTable:
    means = {name: item_mean(sheet, name) for name in sheet.characteristic_order}
    return score_table(means)


def write_table(table: ScoreTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table.to_dict(), fh, indent=2)
        fh.write("\n")
