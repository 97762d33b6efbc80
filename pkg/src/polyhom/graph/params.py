from dataclasses import asdict, dataclass

ENSEMBLES = ("jittered-lattice", "hardcore-poisson")


@dataclass(frozen=True)
class GraphParams:
    """Parameters of a random admissible graph ensemble.

    Lengths are in units of the lattice spacing. ``covering_radius`` (R),
    ``hardcore_radius`` (r) and ``interaction_range`` (C0) are the constants of
    the admissibility conditions; ``monomer_length`` sets the number of
    monomers per chain through ``N_xy = (|x - y| / monomer_length)**2``.
    """

    dimension: int = 2
    covering_radius: float = 1.0
    hardcore_radius: float = 0.5
    interaction_range: float = 7.0
    monomer_length: float = 0.1
    ensemble: str = "jittered-lattice"
    jitter: float = 0.2
    volumetric_fraction: float = 1.0
    seed: int = 0
    # hardcore-poisson only: candidate intensity per unit volume
    intensity: float = 12.0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"ensemble must be one of {ENSEMBLES}, got {self.ensemble!r}")
        r, R, C0 = self.hardcore_radius, self.covering_radius, self.interaction_range
        if not r > 0:
            raise ValueError("hardcore_radius must be positive")
        if R < r / 2:
            raise ValueError("covering_radius must be at least hardcore_radius / 2")
        if not 6 * R < C0:
            raise ValueError(f"interaction_range must exceed 6 * covering_radius ({6 * R}), got {C0}")
        if self.ensemble == "jittered-lattice" and not 0 <= self.jitter < (1 - r) / 2:
            raise ValueError(f"jitter must lie in [0, {(1 - r) / 2}) for hardcore_radius {r}")
        if not 0 < self.volumetric_fraction <= 1:
            raise ValueError("volumetric_fraction must lie in (0, 1]")
        if self.monomer_length <= 0:
            raise ValueError("monomer_length must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)
