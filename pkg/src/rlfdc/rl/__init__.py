"""The learned FDC metric: Q network, replay memory and trainer."""
from .network import (ModelError, QModel, dumps_model, forward, forward_batch, layer_shapes,
                      load_model, loss_and_grad, model_from_dict, save_model)
from .replay import ReplayMemory, Transition
from .train import (TrainConfig, TrainTrace, candidate_pool, compute_targets, init_model,
                    predict_fdc, predict_rows, state_input, sync_target, train, train_step)

__all__ = [
    "ModelError", "QModel", "ReplayMemory", "TrainConfig", "TrainTrace", "Transition",
    "candidate_pool", "compute_targets", "dumps_model", "forward", "forward_batch",
    "init_model", "layer_shapes", "load_model", "loss_and_grad", "model_from_dict",
    "predict_fdc", "predict_rows", "save_model", "state_input", "sync_target", "train",
    "train_step",
]
