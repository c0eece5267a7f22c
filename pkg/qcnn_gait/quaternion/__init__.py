from qcnn_gait.quaternion.algebra import (
    IDENTITY,
    Quaternion,
    Vector3,
    conjugate,
    conjugation_rotate,
    embed_pure,
    from_axis_angle,
    hamilton_product,
    inverse,
    left_multiplication_matrix,
    magnitude,
    normalize,
    quaternion,
    random_unit_quaternion,
    rotation_angle,
    rotation_matrix,
    vector_part,
)

__all__ = [
    "IDENTITY",
    "Quaternion",
    "Vector3",
    "conjugate",
    "conjugation_rotate",
    "embed_pure",
    "from_axis_angle",
    "hamilton_product",
    "inverse",
    "left_multiplication_matrix",
    "magnitude",
    "normalize",
    "quaternion",
    "random_unit_quaternion",
    "rotation_angle",
    "rotation_matrix",
    "vector_part",
]
