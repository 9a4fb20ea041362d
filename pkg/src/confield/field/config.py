"""Architecture configuration for the controllable scene field."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigurationError
from ..facs.regions import RegionTopology


@dataclass(frozen=True)
class FieldConfig:
    """Dimensions and layer widths of every sub-network.

    Widths are sized for CPU-scale scenes; `attr_hidden` keeps the published
    6x32-with-skip layout of the attribute network.
    """

    num_attributes: int
    num_regions: int
    region_of_attribute: tuple[int, ...]

    d_omega: int = 8
    d_psi: int = 8
    d_hyper: int = 2

    pe_spatial: int = 8
    pe_direction: int = 4
    pe_hyper: int = 2

    attr_hidden: tuple[int, ...] = (32, 32, 32, 32, 32, 32)
    attr_skip: int = 4            # skip connection entering the fifth layer
    hidden_activation: str = "relu"  # tanh gives a C3 field for gradient checks
    deform_hidden: tuple[int, ...] = (32, 32, 32)
    slice_hidden: tuple[int, ...] = (32, 32)
    mask_hidden: tuple[int, ...] = (64, 64)
    uncert_hidden: tuple[int, ...] = (32,)
    template_hidden: tuple[int, ...] = (96, 96, 96, 96)
    template_skip: int = 2
    color_hidden: int = 48

    max_offset: float = 0.25      # deformation residual bound, scene units
    beta_floor: float = 1e-2      # uncertainty lower bound
    head_init_scale: float = 1e-2  # final-layer shrink for mask/density/offset heads
    sigma_bias_init: float = -4.0  # density head bias: space starts nearly empty

    def __post_init__(self):
        if len(self.region_of_attribute) != self.num_attributes:
            raise ConfigurationError(
                f"{self.num_attributes} attributes but "
                f"{len(self.region_of_attribute)} region assignments")
        for r in self.region_of_attribute:
            if not 1 <= r <= self.num_regions:
                raise ConfigurationError(f"region id {r} outside 1..{self.num_regions}")

    @property
    def topology(self) -> RegionTopology:
        return RegionTopology(self.num_regions, self.region_of_attribute)

    def attributes_of_region(self, region: int) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.region_of_attribute) if r == region)

    @staticmethod
    def from_topology(topology: RegionTopology, **kwargs) -> "FieldConfig":
        return FieldConfig(
            num_attributes=topology.num_attributes,
            num_regions=topology.num_regions,
            region_of_attribute=topology.region_of_attribute,
            **kwargs,
        )
