"""
TRACKING - Optional MLflow logging of a sweep
================================================================================

Off unless MLFLOW_TRACKING_URI (or --mlflow-uri) is set. One parent run per
sweep holds the config, the summary medians and the result files; every
pipeline run becomes a nested run with its own params and metrics.

mlflow is imported lazily so the harness works without a tracking server.

================================================================================
"""

import logging
from datetime import datetime
from pathlib import Path
from typing import List, Optional

from bench.config import config
from bench.schemas import ExperimentConfig, ExperimentRecord, SummaryRow

log = logging.getLogger("bench.tracking")


def track_sweep(
    cfg: ExperimentConfig,
    records: List[ExperimentRecord],
    summary: List[SummaryRow],
    artifacts: List[Path],
    tracking_uri: Optional[str] = None,
) -> Optional[str]:
    """Log a finished sweep; returns the parent run id, or None when tracking is off."""
    uri = tracking_uri if tracking_uri is not None else config.mlflow.tracking_uri
    if not uri:
        return None

    import mlflow

    log.info(f"MLflow tracking URI: {uri}")
    mlflow.set_tracking_uri(uri)
    mlflow.set_experiment(config.mlflow.experiment_name)

    with mlflow.start_run(run_name=f"sweep_{datetime.now().strftime('%Y%m%d_%H%M%S')}") as parent:
        params = cfg.model_dump(mode="json")
        params["sparsities"] = ",".join(str(s) for s in cfg.sparsities)
        params["strategies"] = ",".join(s.value for s in cfg.strategies)
        mlflow.log_params(params)

        for row in summary:
            prefix = f"{row.strategy.value}_s{row.s}"
            if row.median_rel_l2_err is not None:
                mlflow.log_metric(f"{prefix}_median_rel_l2_err", row.median_rel_l2_err)
                mlflow.log_metric(f"{prefix}_median_samples", row.median_samples)
                mlflow.log_metric(f"{prefix}_median_wall_s", row.median_wall_s)

        for record in records:
            with mlflow.start_run(run_name=f"{record.strategy.value}_s{record.s}_rep{record.rep}", nested=True):
                mlflow.log_params({"strategy": record.strategy.value, "s": record.s, "rep": record.rep, "seed": record.seed})
                mlflow.set_tag("status", record.status.value)
                mlflow.log_metric("samples", record.samples)
                mlflow.log_metric("wall_s", record.wall_s)
                if record.rel_l2_err is not None:
                    mlflow.log_metric("rel_l2_err", record.rel_l2_err)
                    mlflow.log_metric("max_coeff_err", record.max_coeff_err)

        for path in artifacts:
            mlflow.log_artifact(str(path))

        run_id = parent.info.run_id
    log.info(f"🔗 MLflow Run ID: {run_id}")
    return run_id
