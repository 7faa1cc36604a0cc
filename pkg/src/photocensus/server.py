"""HTTP service over the census pipeline.

State is kept in memory and persisted as two append-only JSON-lines
journals (the photo dataset and the decision log) that are replayed at
startup, so every server state is reconstructible from its files. All
mutations go through one lock; reads serve the latest committed state.

Role gates: ingesting, reviewing, and exporting need researcher or admin;
read routes accept any authenticated role. Coordinates of species under a
sensitive policy are grid-snapped for roles without raw access on every
route that carries locations.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response

from . import census as census_mod
from .errors import ConfigError, SelfMatchError, UndefinedEstimateError
from .matching import (
    MatchGraph,
    append_decision,
    cluster_individuals,
    generate_candidates,
    load_decisions,
    ordered_pair,
    replay_decisions,
)
from .privacy import ADMIN, PUBLIC, RESEARCHER, ROLES, PolicyTable, SensitivePolicy
from .records import (
    Dataset,
    OccasionRule,
    assign_occasions,
    collection_stats,
    header_line,
    ingest,
    load_dataset,
    parse_photo_record,
    record_to_line,
)

DATASET_FILE = "dataset.pcjl"
DECISIONS_FILE = "decisions.jsonl"

WRITE_ROLES = frozenset({ADMIN, RESEARCHER})


@dataclass(frozen=True)
class TokenInfo:
    role: str
    name: str


def load_token_table(path: str | Path) -> dict[str, TokenInfo]:
    """Token file: {"<token>": "role"} or {"<token>": {"role": ..., "name": ...}}."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError("token table must be a JSON object")
    table: dict[str, TokenInfo] = {}
    for token, value in raw.items():
        if isinstance(value, str):
            info = TokenInfo(role=value, name=value)
        elif isinstance(value, dict) and "role" in value:
            info = TokenInfo(role=value["role"], name=value.get("name", value["role"]))
        else:
            raise ConfigError(f"bad token entry for {token!r}")
        if info.role not in ROLES:
            raise ConfigError(f"unknown role {info.role!r}")
        table[token] = info
    return table


def load_policies(path: str | Path) -> PolicyTable:
    """Policy file: a JSON list of sensitive-species entries."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ConfigError("policy file must hold a JSON list")
    policies = []
    for entry in raw:
        policies.append(
            SensitivePolicy(
                species=entry["species"],
                grid_degrees=entry.get("grid_degrees", 0.1),
                raw_access_roles=frozenset(entry.get("raw_access_roles", [ADMIN, RESEARCHER])),
            )
        )
    return PolicyTable.from_list(policies)


class AppState:
    """In-memory state plus its journals."""

    def __init__(
        self,
        data_dir: str | Path | None,
        tokens: dict[str, TokenInfo],
        policies: PolicyTable,
        threshold: float = 0.8,
        top_k: int = 5,
        occasion_rule: OccasionRule = OccasionRule(),
        embedding_dim: int = 64,
    ):
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.tokens = tokens
        self.policies = policies
        self.threshold = threshold
        self.top_k = top_k
        self.occasion_rule = occasion_rule
        self.lock = threading.Lock()
        self._version = 0
        self._cache: dict = {}

        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            dataset_path = self.data_dir / DATASET_FILE
            if dataset_path.exists():
                self.dataset, _ = load_dataset(dataset_path)
            else:
                self.dataset = Dataset(embedding_dim=embedding_dim)
            self.graph = MatchGraph(a.annotation_id for a in self.dataset.annotations())
            replay_decisions(self.graph, load_decisions(self.data_dir / DECISIONS_FILE))
        else:
            self.dataset = Dataset(embedding_dim=embedding_dim)
            self.graph = MatchGraph()

    # -- journals -------------------------------------------------------

    def _append_dataset_line(self, line: str) -> None:
        if self.data_dir is None:
            return
        path = self.data_dir / DATASET_FILE
        if not path.exists():
            path.write_text(header_line(self.dataset.embedding_dim) + "\n", encoding="utf-8")
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    # -- derived state, cached per mutation generation --------------------

    def bump(self) -> None:
        self._version += 1

    def _cached(self, key: str, build):
        entry = self._cache.get(key)
        if entry is not None and entry[0] == self._version:
            return entry[1]
        value = build()
        self._cache[key] = (self._version, value)
        return value

    def partition(self):
        return self._cached("partition", lambda: cluster_individuals(self.graph))

    def occasions(self):
        return self._cached(
            "occasions", lambda: assign_occasions(self.dataset, self.occasion_rule)
        )

    def candidates(self):
        return self._cached(
            "candidates",
            lambda: generate_candidates(
                self.dataset.annotations(), threshold=self.threshold, top_k=self.top_k
            ),
        )

    def annotation_meta(self) -> dict[str, dict]:
        def build():
            meta = {}
            for ann in self.dataset.annotations():
                record = self.dataset.get(ann.photo_id)
                meta[ann.annotation_id] = {
                    "annotation_id": ann.annotation_id,
                    "photo_id": ann.photo_id,
                    "species": ann.species,
                    "timestamp": record.timestamp.isoformat(),
                    "lat": record.lat,
                    "lon": record.lon,
                    "quality": ann.quality,
                }
            return meta

        return self._cached("annotation_meta", build)

    def visible_meta(self, annotation_id: str, role: str) -> dict:
        meta = dict(self.annotation_meta()[annotation_id])
        lat, lon = self.policies.visible_location(meta["species"], meta["lat"], meta["lon"], role)
        meta["lat"], meta["lon"] = lat, lon
        return meta


def _bearer_token(request: Request) -> str:
    header = request.headers.get("authorization", "")
    if not header.lower().startswith("bearer "):
        raise HTTPException(status_code=401, detail="missing bearer token")
    return header[7:].strip()


def create_app(
    data_dir: str | Path | None = None,
    tokens: dict[str, TokenInfo] | None = None,
    policies: PolicyTable | None = None,
    threshold: float = 0.8,
    top_k: int = 5,
    occasion_rule: OccasionRule = OccasionRule(),
    embedding_dim: int = 64,
) -> FastAPI:
    """Build the service. With no token table, a single admin token "dev" works."""
    state = AppState(
        data_dir=data_dir,
        tokens=tokens if tokens is not None else {"dev": TokenInfo(role=ADMIN, name="dev")},
        policies=policies if policies is not None else PolicyTable(),
        threshold=threshold,
        top_k=top_k,
        occasion_rule=occasion_rule,
        embedding_dim=embedding_dim,
    )
    app = FastAPI(title="photocensus")
    app.state.census = state

    def authenticate(request: Request) -> TokenInfo:
        token = _bearer_token(request)
        info = state.tokens.get(token)
        if info is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return info

    def require_writer(info: TokenInfo) -> None:
        if info.role not in WRITE_ROLES:
            raise HTTPException(status_code=403, detail=f"role {info.role!r} may not do this")

    async def read_json_body(request: Request):
        try:
            return json.loads(await request.body())
        except json.JSONDecodeError:
            raise HTTPException(status_code=400, detail="body is not valid JSON") from None

    @app.post("/encounters", status_code=201)
    async def post_encounters(request: Request):
        info = authenticate(request)
        require_writer(info)
        body = await read_json_body(request)
        if isinstance(body, dict) and "records" in body:
            items = body["records"]
        elif isinstance(body, dict):
            items = [body]
        elif isinstance(body, list):
            items = body
        else:
            raise HTTPException(status_code=400, detail="expected a record or a list of records")
        lines = [json.dumps(item, separators=(",", ":")) for item in items]
        with state.lock:
            accepted = duplicates = rejected = 0
            for line in lines:
                report = ingest(state.dataset, [line])
                accepted += report.accepted
                duplicates += report.duplicates_skipped
                rejected += report.rejected
                if report.accepted:
                    record = parse_photo_record(line)
                    state._append_dataset_line(record_to_line(record))
                    for idx in range(len(record.annotations)):
                        state.graph._ids.add(f"{record.photo_id}#{idx}")
            state.bump()
        return {"accepted": accepted, "duplicates_skipped": duplicates, "rejected": rejected}

    @app.get("/individuals")
    def get_individuals(request: Request):
        authenticate(request)
        partition = state.partition()
        meta = state.annotation_meta()
        individuals = []
        for individual_id, members in sorted(partition.clusters().items()):
            species = meta[members[0]]["species"] if members[0] in meta else None
            individuals.append(
                {
                    "individual_id": individual_id,
                    "species": species,
                    "annotation_count": len(members),
                }
            )
        return {"individuals": individuals}

    @app.get("/individuals/{individual_id}")
    def get_individual(individual_id: str, request: Request):
        info = authenticate(request)
        partition = state.partition()
        members = partition.members(individual_id)
        if not members:
            raise HTTPException(status_code=404, detail=f"no individual {individual_id!r}")
        occasions = state.occasions()
        annotations = []
        for annotation_id in members:
            meta = state.visible_meta(annotation_id, info.role)
            meta["occasion"] = occasions.get(annotation_id)
            annotations.append(meta)
        return {
            "individual_id": individual_id,
            "species": annotations[0]["species"],
            "annotations": annotations,
        }

    @app.get("/census")
    def get_census(request: Request, species: str, occasions: str = "0,1", estimator: str = census_mod.CHAPMAN):
        authenticate(request)
        try:
            first, second = (int(x) for x in occasions.split(","))
        except ValueError:
            raise HTTPException(status_code=400, detail="occasions must be 'i,j'") from None
        try:
            report = census_mod.census_report(
                state.dataset,
                state.partition(),
                state.occasions(),
                (first, second),
                species=species,
                estimator=estimator,
            )
        except (UndefinedEstimateError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return census_mod.report_to_dict(report)

    @app.get("/review/next")
    def review_next(request: Request):
        info = authenticate(request)
        require_writer(info)
        partition = state.partition()
        sizes = {ind: len(members) for ind, members in partition.clusters().items()}
        for cand in state.candidates():
            if state.graph.live_verdict(cand.a, cand.b) is not None:
                continue
            return {
                "a": cand.a,
                "b": cand.b,
                "score": cand.score,
                "species": cand.species,
                "a_meta": state.visible_meta(cand.a, info.role),
                "b_meta": state.visible_meta(cand.b, info.role),
                "cluster_sizes": {
                    "a": sizes.get(partition.assignment.get(cand.a, cand.a), 1),
                    "b": sizes.get(partition.assignment.get(cand.b, cand.b), 1),
                },
            }
        return Response(status_code=204)

    @app.post("/review/decision")
    async def review_decision(request: Request):
        info = authenticate(request)
        require_writer(info)
        body = await read_json_body(request)
        if not isinstance(body, dict):
            raise HTTPException(status_code=400, detail="expected a decision object")
        pair = body.get("pair") or [body.get("a"), body.get("b")]
        verdict = body.get("verdict")
        supersede = bool(body.get("supersede", False))
        if (
            not isinstance(pair, (list, tuple))
            or len(pair) != 2
            or not all(isinstance(x, str) and x for x in pair)
        ):
            raise HTTPException(status_code=400, detail="pair must be two annotation ids")
        if verdict not in ("same", "different"):
            raise HTTPException(status_code=400, detail="verdict must be 'same' or 'different'")
        known = state.graph.annotation_ids
        missing = [x for x in pair if x not in known]
        if missing:
            raise HTTPException(status_code=404, detail=f"unknown annotations {missing}")
        with state.lock:
            try:
                existing = state.graph.live_verdict(pair[0], pair[1])
            except SelfMatchError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from None
            if existing is not None and not supersede:
                raise HTTPException(
                    status_code=409,
                    detail=f"pair already decided ({existing.verdict}); pass supersede to override",
                )
            edge = state.graph.apply_decision(tuple(pair), verdict, reviewer=info.name)
            if state.data_dir is not None:
                append_decision(state.data_dir / DECISIONS_FILE, edge)
            state.bump()
        return {
            "a": edge.a,
            "b": edge.b,
            "verdict": edge.verdict,
            "decided_by": edge.decided_by,
            "decided_at": edge.decided_at.isoformat(),
            "superseded": existing is not None,
        }

    @app.get("/stats")
    def get_stats(request: Request):
        authenticate(request)
        stats = collection_stats(state.dataset)
        return {
            "cars": stats.cars,
            "cameras": stats.cameras,
            "photographs": stats.photographs,
            "annotations": stats.annotations,
            "per_species": stats.per_species,
        }

    @app.get("/export")
    def export_dataset(request: Request):
        info = authenticate(request)
        require_writer(info)
        lines = [header_line(state.dataset.embedding_dim)]
        for record in state.dataset.records:
            lat, lon = state.policies.visible_location(
                record.species, record.lat, record.lon, info.role
            )
            lines.append(record_to_line(replace(record, lat=lat, lon=lon)))
        return Response("\n".join(lines) + "\n", media_type="application/x-ndjson")

    return app
