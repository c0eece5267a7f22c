from qcnn_gait.autodiff.gradcheck import gradient_check
from qcnn_gait.autodiff.primitives import Primitive
from qcnn_gait.autodiff.tape import Gradients, Tape, Variable

__all__ = ["Gradients", "Primitive", "Tape", "Variable", "gradient_check"]
