import logging

from celery import shared_task

from apps.bench.schemas import ExperimentConfig

logger = logging.getLogger(__name__)


@shared_task(name="apps.bench.tasks.run_experiment_task", acks_late=True)
def run_experiment_task(config_json: str) -> dict:
    """
    Executa um experimento no worker. Recebe a configuração como JSON para
    manter o serializer do Celery em json.
    """
    from apps.bench.services import run_experiment

    cfg = ExperimentConfig.model_validate_json(config_json)
    record = run_experiment(cfg)
    logger.info("[Experimento] %s terminou com status %s.", cfg.method.kind, record.status)
    return {"output_dir": str(cfg.resolved_output_dir()), "status": str(record.status)}
