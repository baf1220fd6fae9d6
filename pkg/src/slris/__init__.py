"""Classifier-driven ON/OFF control of reconfigurable intelligent surfaces.

Modules:

- ``signalgen``  synthetic I/Q windows for the four occupancy classes
- ``dataset``    labeled datasets and the ``.risl`` file format
- ``neuralnet``  numpy CNN: layers, backprop, Adam, ``.rism`` checkpoints
- ``channel``    geometry and SINR for any RIS ON/OFF pattern
- ``controller`` classifier-driven ON/OFF decisions
- ``harness``    Monte Carlo sweeps plus the end-to-end pipeline
"""

from .signalgen import SignalClass, UserSignature, IqWindow, make_window
from .channel import ScenarioParams, layout, sinr
from .controller import decide, greedy_states, oracle_states
from .neuralnet import CnnModel, TrainConfig, init_model, predict, train

__version__ = "0.1.0"

__all__ = [
    "CnnModel",
    "IqWindow",
    "ScenarioParams",
    "SignalClass",
    "TrainConfig",
    "UserSignature",
    "decide",
    "greedy_states",
    "init_model",
    "layout",
    "make_window",
    "oracle_states",
    "predict",
    "sinr",
    "train",
]
