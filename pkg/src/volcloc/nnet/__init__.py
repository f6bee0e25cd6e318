from .layers import (
    ConvLayer,
    ConvParams,
    FcLayer,
    FcParams,
    LstmLayerParams,
    LstmStackState,
    conv2d_backward,
    conv2d_forward,
    dropout_forward,
    fc_backward,
    fc_forward,
    lstm_cell_forward,
    lstm_stack_backward,
    lstm_stack_forward,
)
from .loss import LOSSES, loss_mae, loss_mse
from .models import CnnRegressor, ConvOnly, FcOnly, LstmOnly, LstmRegressor, Network, conv_stack
from .optim import OPTIMIZERS, OptimizerState, adam_step, sgd_step
from .gradcheck import grad_check, relative_error
from .checkpoint import dumps_vloc, loads_vloc, read_vloc, write_vloc
