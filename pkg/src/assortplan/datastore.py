"""File-backed store for catalogs, transactions, and choice-model parameters.

Layout under one root directory::

    <root>/
      ingest.log                    append-only ingestion journal
      <dataset_id>/
        catalog.csv                 product_id,name,price
        transactions.csv            Ta-Feng column layout (copied on ingest)
        parameters-<model>.csv      dataset,model,product_id,utility  (id 0 = v0)
        observations.csv            offered,chosen  (optional; MLE input)

Reads are concurrent; writes go through write-then-atomic-rename so a reader
never sees a partially written file.  Floats are serialized with ``repr`` so
a save/load round trip is bit-exact.
"""

from __future__ import annotations

import csv
import os
import tempfile
import time
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path

from .choice import Assortment, Catalog, MnlParameters, Product
from .errors import (
    IngestionError,
    ParameterMismatchError,
    UnknownDatasetError,
    UnknownModelError,
)
from .estimation import OfferSetObservation, TransactionRecord

CATALOG_HEADER = ("product_id", "name", "price")
PARAMETERS_HEADER = ("dataset", "model", "product_id", "utility")
OBSERVATIONS_HEADER = ("offered", "chosen")

# Ta-Feng layout; only the four starred columns are consumed.
TRANSACTION_COLUMNS = (
    "transaction_date",   # *
    "customer_id",        # *
    "age_group",
    "pin_code",
    "product_subclass",
    "product_id",         # *
    "amount",             # * quantity
    "asset",
    "sales_price",
)
_CONSUMED = ("transaction_date", "customer_id", "product_id", "amount")


@dataclass(frozen=True)
class ParameterKey:
    """(dataset, model) lookup key; both parts lowercase-normalized."""

    dataset_id: str
    model_id: str

    def __post_init__(self):
        for name in ("dataset_id", "model_id"):
            value = getattr(self, name).strip().lower()
            if not value:
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class DatasetDescriptor:
    dataset_id: str
    product_count: int
    available_models: frozenset[str]
    source_path: str

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "product_count": self.product_count,
            "available_models": sorted(self.available_models),
            "source_path": self.source_path,
        }


@dataclass(frozen=True)
class IngestReport:
    valid_count: int
    skipped_count: int
    distinct_users: int

    @property
    def total_rows(self) -> int:
        return self.valid_count + self.skipped_count


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_catalog(path: str | Path, dataset_id: str) -> Catalog:
    """Read and validate a catalog CSV; bad rows are reported by number."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"catalog file not found: {path}")
    products: list[Product] = []
    bad: list[str] = []
    bad_rows: list[int] = []
    seen: set[int] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != CATALOG_HEADER:
            raise IngestionError(
                f"catalog header must be {','.join(CATALOG_HEADER)}, got {header} in {path}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                pid = int(row[0])
                name = row[1].strip()
                price = float(row[2])
                if pid <= 0:
                    raise ValueError("product_id must be positive")
                if not price > 0:
                    raise ValueError("price must be > 0")
                if pid in seen:
                    raise ValueError(f"duplicate product_id {pid}")
            except (ValueError, IndexError) as exc:
                bad.append(f"row {lineno}: {exc}")
                bad_rows.append(lineno)
                continue
            seen.add(pid)
            products.append(Product(id=pid, name=name, price=price))
    if bad:
        raise IngestionError(
            f"catalog {path} has {len(bad)} invalid row(s): " + "; ".join(bad[:10]),
            rows=tuple(bad_rows),
        )
    if not products:
        raise IngestionError(f"catalog {path} contains no products")
    return Catalog(dataset_id=dataset_id, products=tuple(products))


def _parse_date(text: str) -> date:
    text = text.strip()
    try:
        return date.fromisoformat(text)
    except ValueError:
        pass
    return datetime.strptime(text, "%m/%d/%Y").date()


def parse_transactions(path: str | Path, catalog: Catalog) -> tuple[list[TransactionRecord], IngestReport]:
    """Read a Ta-Feng-layout transactions CSV (semicolon or comma delimited).

    Rows referencing unknown products, or otherwise malformed, are skipped
    and counted; valid + skipped always equals the number of data rows.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"transactions file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            return [], IngestReport(0, 0, 0)
        delimiter = ";" if first.count(";") >= first.count(",") else ","
        header = [h.strip().lower() for h in first.strip().split(delimiter)]
        col = {name: header.index(name) for name in _CONSUMED if name in header}
        missing = [name for name in _CONSUMED if name not in col]
        if missing:
            raise IngestionError(f"transactions header in {path} lacks columns {missing}")
        i_date, i_user = col["transaction_date"], col["customer_id"]
        i_prod, i_qty = col["product_id"], col["amount"]

        known = catalog.ids
        records: list[TransactionRecord] = []
        skipped = 0
        users: set[str] = set()
        for row in csv.reader(fh, delimiter=delimiter):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                user = row[i_user].strip()
                if user:
                    users.add(user)
                pid = int(row[i_prod])
                qty = int(row[i_qty])
                when = _parse_date(row[i_date])
                if qty < 1 or pid not in known:
                    skipped += 1
                    continue
            except (ValueError, IndexError):
                skipped += 1
                continue
            records.append(TransactionRecord(timestamp=when, user_id=user, product_id=pid, quantity=qty))
    return records, IngestReport(len(records), skipped, len(users))


def parse_observations(path: str | Path, catalog: Catalog) -> list[OfferSetObservation]:
    """Read offer-set observations: header ``offered,chosen``, offered ids space-separated."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"observations file not found: {path}")
    observations: list[OfferSetObservation] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != OBSERVATIONS_HEADER:
            raise IngestionError(f"observations header must be offered,chosen in {path}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                offered = Assortment.of(int(tok) for tok in row[0].split())
                chosen = int(row[1])
                if not offered.product_ids <= catalog.ids:
                    raise ValueError("offered set references unknown products")
                observations.append(OfferSetObservation(offered=offered, chosen=chosen))
            except (ValueError, IndexError) as exc:
                raise IngestionError(f"observations row {lineno}: {exc}", rows=(lineno,)) from None
    return observations


class DataStore:
    """Directory of datasets: the parameter database behind the planner."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # -- paths -------------------------------------------------------------

    def _dataset_dir(self, dataset_id: str) -> Path:
        return self.root / dataset_id.strip().lower()

    def _catalog_path(self, dataset_id: str) -> Path:
        return self._dataset_dir(dataset_id) / "catalog.csv"

    def _parameters_path(self, key: ParameterKey) -> Path:
        return self._dataset_dir(key.dataset_id) / f"parameters-{key.model_id}.csv"

    def _log(self, message: str) -> None:
        stamp = datetime.now().isoformat(timespec="seconds")
        with (self.root / "ingest.log").open("a", encoding="utf-8") as fh:
            fh.write(f"{stamp} {message}\n")

    # -- catalogs ----------------------------------------------------------

    def ingest_catalog(self, path: str | Path, dataset_id: str) -> Catalog:
        dataset_id = dataset_id.strip().lower()
        catalog = parse_catalog(path, dataset_id)
        target = self._catalog_path(dataset_id)
        target.parent.mkdir(parents=True, exist_ok=True)
        rows = ["%s,%s,%s" % (p.id, _csv_escape(p.name), repr(p.price)) for p in catalog]
        _atomic_write(target, ",".join(CATALOG_HEADER) + "\n" + "\n".join(rows) + "\n")
        self._log(f"catalog dataset={dataset_id} products={len(catalog)} source={path}")
        return catalog

    def catalog(self, dataset_id: str) -> Catalog:
        dataset_id = dataset_id.strip().lower()
        path = self._catalog_path(dataset_id)
        if not path.exists():
            raise UnknownDatasetError(dataset_id, tuple(self.dataset_ids()))
        return parse_catalog(path, dataset_id)

    def dataset_ids(self) -> list[str]:
        return sorted(
            child.name for child in self.root.iterdir()
            if child.is_dir() and (child / "catalog.csv").exists()
        )

    # -- transactions ------------------------------------------------------

    def ingest_transactions(self, path: str | Path, dataset_id: str) -> tuple[list[TransactionRecord], IngestReport]:
        dataset_id = dataset_id.strip().lower()
        catalog = self.catalog(dataset_id)
        records, report = parse_transactions(path, catalog)
        target = self._dataset_dir(dataset_id) / "transactions.csv"
        _atomic_write(target, Path(path).read_text(encoding="utf-8"))
        self._log(
            f"transactions dataset={dataset_id} valid={report.valid_count} "
            f"skipped={report.skipped_count} users={report.distinct_users} source={path}"
        )
        return records, report

    def transactions(self, dataset_id: str) -> list[TransactionRecord]:
        dataset_id = dataset_id.strip().lower()
        catalog = self.catalog(dataset_id)
        path = self._dataset_dir(dataset_id) / "transactions.csv"
        if not path.exists():
            raise IngestionError(f"no transactions ingested for dataset '{dataset_id}'")
        records, _ = parse_transactions(path, catalog)
        return records

    def observations(self, dataset_id: str) -> list[OfferSetObservation]:
        dataset_id = dataset_id.strip().lower()
        catalog = self.catalog(dataset_id)
        path = self._dataset_dir(dataset_id) / "observations.csv"
        if not path.exists():
            raise IngestionError(
                f"no observations.csv for dataset '{dataset_id}'; the MLE estimator needs "
                f"offer-set observations (header: offered,chosen; offered ids space-separated)"
            )
        return parse_observations(path, catalog)

    # -- parameters ----------------------------------------------------------

    def put_parameters(self, key: ParameterKey, params: MnlParameters) -> None:
        catalog = self.catalog(key.dataset_id)
        if frozenset(params.utilities) != catalog.ids:
            raise ParameterMismatchError(
                f"parameters do not cover catalog '{key.dataset_id}' exactly"
            )
        lines = [",".join(PARAMETERS_HEADER)]
        lines.append(f"{key.dataset_id},{key.model_id},0,{params.v0!r}")
        for pid in sorted(params.utilities):
            lines.append(f"{key.dataset_id},{key.model_id},{pid},{params.utilities[pid]!r}")
        _atomic_write(self._parameters_path(key), "\n".join(lines) + "\n")
        self._log(f"parameters dataset={key.dataset_id} model={key.model_id} products={len(params.utilities)}")

    def get_parameters(self, key: ParameterKey) -> MnlParameters:
        catalog = self.catalog(key.dataset_id)  # raises UnknownDatasetError first
        path = self._parameters_path(key)
        if not path.exists():
            raise UnknownModelError(key.dataset_id, key.model_id, tuple(self.available_models(key.dataset_id)))
        v0 = None
        utilities: dict[int, float] = {}
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip().lower() for h in header) != PARAMETERS_HEADER:
                raise IngestionError(f"parameters header must be {','.join(PARAMETERS_HEADER)} in {path}")
            for row in reader:
                if not row or all(not cell.strip() for cell in row):
                    continue
                pid = int(row[2])
                value = float(row[3])
                if pid == 0:
                    v0 = value
                else:
                    utilities[pid] = value
        if v0 is None:
            raise IngestionError(f"parameters file {path} lacks the no-purchase row (product_id 0)")
        try:
            params = MnlParameters(dataset_id=key.dataset_id, model_id=key.model_id, v0=v0, utilities=utilities)
        except ValueError as exc:
            raise IngestionError(f"parameters file {path}: {exc}") from None
        if frozenset(params.utilities) != catalog.ids:
            raise ParameterMismatchError(
                f"stored parameters for ({key.dataset_id}, {key.model_id}) do not match the catalog"
            )
        return params

    def ingest_parameters(self, path: str | Path, dataset_id: str | None = None) -> tuple[ParameterKey, MnlParameters]:
        """Load a parameters CSV and store it under the key its rows declare."""
        path = Path(path)
        if not path.exists():
            raise IngestionError(f"parameters file not found: {path}")
        keys = set()
        v0 = None
        utilities: dict[int, float] = {}
        bad_rows: list[int] = []
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip().lower() for h in header) != PARAMETERS_HEADER:
                raise IngestionError(f"parameters header must be {','.join(PARAMETERS_HEADER)} in {path}")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not cell.strip() for cell in row):
                    continue
                try:
                    keys.add((row[0].strip().lower(), row[1].strip().lower()))
                    pid = int(row[2])
                    value = float(row[3])
                except (ValueError, IndexError) as exc:
                    raise IngestionError(f"parameters row {lineno}: {exc}", rows=(lineno,)) from None
                if not 0.0 < value <= 1.0:
                    bad_rows.append(lineno)
                    continue
                if pid == 0:
                    v0 = value
                else:
                    utilities[pid] = value
        if bad_rows:
            # weights must be strictly positive: a zero weight marks a product
            # customers never choose, which has no business being offered
            raise IngestionError(
                f"parameters file {path} has {len(bad_rows)} weight(s) outside (0, 1] "
                f"at rows {bad_rows[:10]}",
                rows=tuple(bad_rows),
            )
        if len(keys) != 1:
            raise IngestionError(f"parameters file {path} must carry exactly one (dataset, model) pair, got {sorted(keys)}")
        ds, model = next(iter(keys))
        if dataset_id is not None and ds != dataset_id.strip().lower():
            raise IngestionError(f"parameters file declares dataset '{ds}', not '{dataset_id}'")
        if v0 is None:
            raise IngestionError(f"parameters file {path} lacks the no-purchase row (product_id 0)")
        key = ParameterKey(ds, model)
        params = MnlParameters(dataset_id=ds, model_id=model, v0=v0, utilities=utilities)
        self.put_parameters(key, params)
        return key, params

    def available_models(self, dataset_id: str) -> list[str]:
        directory = self._dataset_dir(dataset_id)
        if not directory.is_dir():
            return []
        return sorted(
            p.name[len("parameters-"):-len(".csv")]
            for p in directory.glob("parameters-*.csv")
        )

    # -- listing -------------------------------------------------------------

    def list_datasets(self) -> list[DatasetDescriptor]:
        descriptors = []
        for ds in self.dataset_ids():
            catalog = self.catalog(ds)
            descriptors.append(
                DatasetDescriptor(
                    dataset_id=ds,
                    product_count=len(catalog),
                    available_models=frozenset(self.available_models(ds)),
                    source_path=str(self._catalog_path(ds)),
                )
            )
        return descriptors


def _csv_escape(name: str) -> str:
    if any(ch in name for ch in ',"\n'):
        return '"' + name.replace('"', '""') + '"'
    return name
