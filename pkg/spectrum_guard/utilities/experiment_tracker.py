"""
Run metrics tracking with optional ElasticSearch indexing.
"""
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional
from urllib.parse import urlsplit, urlunsplit
import logging
import time

from elasticsearch import Elasticsearch

from spectrum_guard.models import EvalReport, RunMetrics, StageMetrics

logger = logging.getLogger(__name__)

RUN_METRICS_FILE = "run_metrics.json"


def _plain(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def redact_uri(uri: Optional[str]) -> Optional[str]:
    """Strip ``user:password@`` from a URI."""
    if not uri:
        return uri
    parts = urlsplit(uri)
    if parts.username is None and parts.password is None:
        return uri
    host = parts.hostname or ''
    netloc = f"{host}:{parts.port}" if parts.port else host
    return urlunsplit(parts._replace(netloc=netloc))


class ExperimentTracker:
    """
    Records stage timings and evaluation cells for one CLI run.

    The run document is always written to ``run_metrics.json`` in the run
    directory; it is also indexed to ElasticSearch when a client is
    configured. Indexing failures are logged and never abort a run.
    """

    def __init__(
        self,
        run_dir: Path,
        es_uri: Optional[str] = None,
        es_api_key: Optional[str] = None,
        index_name: str = "spectrum-guard",
        es_client: Optional[Elasticsearch] = None
    ):
        """
        Args:
            run_dir: Directory receiving run_metrics.json
            es_uri: ElasticSearch URI; indexing is off when unset
            es_api_key: ElasticSearch API key
            index_name: Index for run documents
            es_client: Pre-built client (tests inject a mock here)
        """
        self.run_dir = Path(run_dir)
        self.index_name = index_name
        self.es_client = es_client
        if self.es_client is None and es_uri and es_api_key:
            self.es_client = Elasticsearch([es_uri], api_key=es_api_key, verify_certs=True)
            try:
                if self.es_client.ping():
                    logger.info(f"Successfully connected to ElasticSearch at {redact_uri(es_uri)}")
                else:
                    logger.error("Failed to ping ElasticSearch")
            except Exception as e:
                logger.error(f"ElasticSearch connection error: {e}")
        if self.es_client is not None:
            self._ensure_index_exists()

        self.current_run: Optional[RunMetrics] = None
        self._run_start: Optional[float] = None

    def _ensure_index_exists(self):
        """Create the index with mappings for the run document."""
        try:
            if self.es_client.indices.exists(index=self.index_name):
                return
            mappings = {
                "properties": {
                    "run_id": {"type": "keyword"},
                    "command": {"type": "keyword"},
                    "run_timestamp": {"type": "date"},
                    "seed": {"type": "long"},
                    "total_duration_seconds": {"type": "float"},
                    "stages": {
                        "properties": {
                            "name": {"type": "keyword"},
                            "duration_seconds": {"type": "float"},
                            "items": {"type": "integer"},
                            "success": {"type": "boolean"}
                        }
                    },
                    "reports": {
                        "properties": {
                            "variant": {"type": "keyword"},
                            "sweep_param": {"type": "keyword"},
                            "sweep_value": {"type": "float"},
                            "localization_error_m": {"type": "float"},
                            "miss_rate": {"type": "float"},
                            "false_alarm_rate": {"type": "float"},
                            "power_error_db": {"type": "float"},
                            "latency_s": {"type": "float"},
                            "num_samples": {"type": "integer"}
                        }
                    },
                    "success": {"type": "boolean"},
                    "indexed_at": {"type": "date"}
                }
            }
            self.es_client.indices.create(index=self.index_name, body={"mappings": mappings})
            logger.info(f"Created ElasticSearch index: {self.index_name}")
        except Exception as e:
            logger.error(f"Could not prepare ElasticSearch index {self.index_name}: {e}")

    def start_run(
        self,
        run_id: str,
        command: str,
        seed: Optional[int] = None,
        arguments: Optional[Dict[str, Any]] = None
    ) -> RunMetrics:
        self.current_run = RunMetrics(
            run_id=run_id,
            command=command,
            seed=seed,
            arguments={k: _plain(v) for k, v in (arguments or {}).items()},
            index_name=self.index_name
        )
        self._run_start = time.time()
        logger.info(f"Started tracking run {run_id} ({command})")
        return self.current_run

    @contextmanager
    def stage(self, name: str) -> Iterator[StageMetrics]:
        """Time a block; the yielded metrics' ``items`` may be set inside it."""
        metrics = StageMetrics(name=name, duration_seconds=0.0)
        started = time.time()
        try:
            yield metrics
        except Exception as e:
            metrics.success = False
            metrics.error = str(e)
            raise
        finally:
            metrics.duration_seconds = time.time() - started
            if self.current_run is not None:
                self.current_run.stages.append(metrics)
            logger.info(f"Stage {name} finished in {metrics.duration_seconds:.2f}s ({metrics.items} items)")

    def add_reports(self, reports: List[EvalReport]) -> None:
        if self.current_run is not None:
            self.current_run.reports.extend(reports)

    def end_run(self, success: bool = True, error: Optional[str] = None) -> Optional[Path]:
        """Finalize, write run_metrics.json and index the run."""
        if not self.current_run:
            logger.warning("No active run to finalize")
            return None
        self.current_run.total_duration_seconds = time.time() - (self._run_start or time.time())
        self.current_run.success = success
        self.current_run.error = error

        if self.es_client is not None:
            self.current_run.indexed_at = datetime.now()
            self._send_to_elasticsearch()

        self.run_dir.mkdir(parents=True, exist_ok=True)
        path = self.run_dir / RUN_METRICS_FILE
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.current_run.model_dump_json(indent=2))
        logger.info(f"Finalized run: {self.current_run.run_id}")
        self.current_run = None
        return path

    def _send_to_elasticsearch(self):
        try:
            doc = self.current_run.model_dump(mode='json')
            response = self.es_client.index(
                index=self.index_name,
                id=self.current_run.run_id,
                body=doc
            )
            logger.info(f"Successfully indexed run {self.current_run.run_id} to ElasticSearch: {response['result']}")
        except Exception as e:
            logger.error(f"Failed to index run to ElasticSearch: {e}")
