from script.utils.file_io import write_atomic
from script.utils.unit_converter import UnitConverter

__all__ = ["UnitConverter", "write_atomic"]
