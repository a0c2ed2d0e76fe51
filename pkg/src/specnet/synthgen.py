"""Synthetic labeled spectra for the three object classes.

Templates are minimal but physically flavored: a power-law quasar continuum
with broad emission lines, a blackbody-like stellar hump with absorption
lines, and a declining galaxy continuum with a 4000 A break and narrow
emission lines. Line sets are disjoint between classes. Everything here is
synthetic and exists so the classifier can be exercised at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import CatalogRecord, ObjectClass
from .preprocess import Spectrum, reduction_grid
from .sampler import SPLIT_NAMES


@dataclass(frozen=True)
class SpectralLine:
    rest_wavelength: float  # Angstrom
    amplitude: float  # relative to local continuum; >0 emission, <0 absorption
    width: float  # Gaussian sigma, rest-frame Angstrom


@dataclass(frozen=True)
class TemplateSpec:
    obj_class: ObjectClass
    continuum: str  # 'powerlaw' | 'blackbody' | 'composite' | 'flat'
    lines: tuple[SpectralLine, ...]


# Disjoint line sets; wavelengths spread so a few lines stay inside the
# [3981, 9120] A window over z in [0, 1.5].
QSO_TEMPLATE = TemplateSpec(
    ObjectClass.QSO,
    "powerlaw",
    (
        SpectralLine(1549.0, 1.2, 25.0),   # C IV, broad
        SpectralLine(1909.0, 0.9, 25.0),   # C III], broad
        SpectralLine(2798.0, 1.0, 22.0),   # Mg II, broad
        SpectralLine(4686.0, 0.8, 20.0),   # He II, broad
        SpectralLine(5477.0, 0.7, 22.0),   # synthetic broad feature
    ),
)

STAR_TEMPLATE = TemplateSpec(
    ObjectClass.STAR,
    "blackbody",
    (
        SpectralLine(1850.0, -0.55, 4.0),
        SpectralLine(2852.0, -0.60, 4.0),  # Mg I
        SpectralLine(4101.0, -0.60, 4.0),  # H delta
        SpectralLine(5890.0, -0.65, 4.0),  # Na D
        SpectralLine(8542.0, -0.55, 5.0),  # Ca II triplet
    ),
)

GALAXY_TEMPLATE = TemplateSpec(
    ObjectClass.GALAXY,
    "composite",
    (
        SpectralLine(2326.0, 0.7, 6.0),    # C II]
        SpectralLine(3727.0, 0.8, 6.0),    # [O II]
        SpectralLine(3934.0, -0.5, 5.0),   # Ca K
        SpectralLine(5007.0, 0.9, 6.0),    # [O III]
        SpectralLine(6563.0, 1.0, 7.0),    # H alpha
    ),
)

TEMPLATES = {
    ObjectClass.GALAXY: GALAXY_TEMPLATE,
    ObjectClass.QSO: QSO_TEMPLATE,
    ObjectClass.STAR: STAR_TEMPLATE,
}


#: rest-frame anchor wavelengths for the line-dominated templates, spread so
#: several stay inside the reduced window over z in [0, 1.5]
_ANCHORS = (1500.0, 2000.0, 2700.0, 3600.0, 4800.0, 6400.0, 8500.0)
#: width proportional to wavelength = constant width on the log grid
#: (about 1.3 native samples)
_REL_WIDTH = 3.0e-4
#: doublet half-separation as a wavelength fraction (about 2.3 native samples)
_REL_SPLIT = 5.2e-4


def line_dominated_templates() -> dict[ObjectClass, TemplateSpec]:
    """Templates sharing one flat continuum, so only lines separate classes.

    Class signatures are structural at the native resolution: galaxies carry
    single narrow emission lines, quasars carry tight emission doublets with
    the same total line flux, stars carry absorption lines. The doublet
    separation is a fraction of a 28x28 bin, so binning merges it into a
    galaxy-like blob while the 60x60 raster resolves it.
    """
    galaxy = tuple(
        SpectralLine(a, 1.6, _REL_WIDTH * a) for a in _ANCHORS
    )
    qso = tuple(
        SpectralLine(a * (1 + s * _REL_SPLIT), 0.8, _REL_WIDTH * a)
        for a in _ANCHORS
        for s in (-1, 1)
    )
    star = tuple(
        # offset anchors keep the per-class line sets disjoint
        SpectralLine(1.045 * a, -0.8, 2.09 * _REL_WIDTH * a) for a in _ANCHORS
    )
    return {
        ObjectClass.GALAXY: TemplateSpec(ObjectClass.GALAXY, "flat", galaxy),
        ObjectClass.QSO: TemplateSpec(ObjectClass.QSO, "flat", qso),
        ObjectClass.STAR: TemplateSpec(ObjectClass.STAR, "flat", star),
    }


def _continuum(kind: str, lam: np.ndarray) -> np.ndarray:
    if kind == "powerlaw":
        return 10.0 * (lam / 4000.0) ** -1.5
    if kind == "blackbody":
        # Wien-flavored hump peaking near 5000 A, scaled to ~10
        x = 28798.0 / lam  # hc/kT at T ~ 5000 K, lam in Angstrom x 1e-1
        return 4.0e3 * (lam / 5000.0) ** -5 / np.expm1(np.clip(x, 1e-6, 50.0))
    if kind == "composite":
        # gentle decline with a 4000 A rest-frame break applied in _evaluate
        return 8.0 * (lam / 4000.0) ** -0.5
    if kind == "flat":
        return np.full_like(lam, 10.0)
    raise ValueError(f"unknown continuum kind {kind!r}")


def synth_spectrum(
    t: TemplateSpec,
    z: float,
    noise_sigma: float,
    seed: int,
    ident: tuple[int, int, int] = (1, 1, 1),
) -> Spectrum:
    """Evaluate continuum + Gaussian lines at observed wavelengths on the
    reduced 3601-sample grid, with seeded Gaussian noise.

    Line centers and widths are redshifted by (1+z); lines shifted out of
    the window simply vanish. Noise std is noise_sigma times the continuum
    median.
    """
    if z < 0:
        raise ValueError("z must be >= 0")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    grid = reduction_grid()
    lam = 10.0 ** grid
    cont = _continuum(t.continuum, lam)
    if t.continuum == "composite":
        # 4000 A break, redshifted with the object
        cont = np.where(lam < 4000.0 * (1.0 + z), 0.55 * cont, cont)
    flux = cont.copy()
    for line in t.lines:
        center = line.rest_wavelength * (1.0 + z)
        width = line.width * (1.0 + z)
        if center < lam[0] - 5 * width or center > lam[-1] + 5 * width:
            continue
        local = np.interp(center, lam, cont)
        flux += line.amplitude * local * np.exp(-0.5 * ((lam - center) / width) ** 2)
    if noise_sigma > 0:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        flux = flux + rng.normal(0.0, noise_sigma * float(np.median(cont)), len(flux))
    return Spectrum(ident, grid, flux, t.obj_class, z)


@dataclass
class SynthDataset:
    spectra: dict[str, list[Spectrum]] = field(default_factory=dict)
    records: list[CatalogRecord] = field(default_factory=list)


def _flat_redshifts(count: int, z_min: float, z_max: float, rng) -> np.ndarray:
    """Stratified-jittered redshifts: flat histogram within one per bin."""
    if count == 0:
        return np.zeros(0)
    if z_max == z_min:
        return np.full(count, z_min)
    u = rng.random(count)
    return z_min + (np.arange(count) + u) * (z_max - z_min) / count


def synth_dataset(
    counts: dict[str, int],
    z_range: tuple[float, float] = (0.0, 1.5),
    noise_sigma: float = 0.05,
    seed: int = 0,
    templates: dict[ObjectClass, TemplateSpec] | None = None,
) -> SynthDataset:
    """Class-balanced, redshift-uniform spectra per split.

    `counts` maps split name to the per-class count for that split. Synthetic
    identifiers are (7000 + class, 55000 + split index, running fiber id);
    the emitted catalog parses through catalog.parse_catalog.
    """
    templates = templates or TEMPLATES
    z_min, z_max = z_range
    out = SynthDataset()
    for split_idx, split in enumerate(SPLIT_NAMES):
        n = counts.get(split, 0)
        if n < 0:
            raise ValueError("counts must be >= 0")
        out.spectra[split] = []
        for cls in ObjectClass:
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(split_idx, int(cls))))
            )
            zs = _flat_redshifts(n, z_min, z_max, rng)
            for k, z in enumerate(zs):
                ident = (7000 + int(cls), 55000 + split_idx, k + 1)
                spec_seed = int(
                    np.random.SeedSequence(
                        seed, spawn_key=(split_idx, int(cls), k)
                    ).generate_state(1)[0]
                )
                spec = synth_spectrum(
                    templates[cls], float(z), noise_sigma, spec_seed, ident
                )
                out.spectra[split].append(spec)
                out.records.append(
                    CatalogRecord(*ident, 1, 0, cls, float(z))
                )
    return out
