"""Regenerate the example models shipped in src/smpskit/models."""

import numpy as np

from smpskit import jsonio
from smpskit.market import reverse_engineer_case1, reverse_engineer_case2, thermo_limit_instance
from smpskit.master import random_birth_death_blocks
from smpskit.projection import random_projection_family
from smpskit.rand import random_complex, random_density, random_hermitian

cx, re = jsonio.encode_complex, jsonio.encode_real
out = jsonio.models_dir()


def save(name, obj):
    jsonio.write_json(obj, out / f"{name}.json")


def main():
    p = 0.3
    save("iid", {"kind": "smps", "alphabet": [0, 1], "N": 8,
                 "operators": [cx([[[np.sqrt(p)]]]), cx([[[np.sqrt(1 - p)]]])]})
    save("markov", {"kind": "markov", "N": 8, "T": re([[0.9, 0.3], [0.1, 0.7]]), "pi": re([0.5, 0.5])})
    T = np.array([[[0.8, 0.2], [0.4, 0.6]], [[0.3, 0.7], [0.1, 0.9]]])
    save("finite_memory", {"kind": "finite_memory", "N": 8, "T": re(T), "p0": re([[0.4, 0.1], [0.2, 0.3]])})

    rng = np.random.default_rng(2024)
    save("diffusive_d2", {"kind": "diffusive", "H": cx(random_hermitian(2, rng, 0.5)),
                          "Rs": [cx(0.4 * random_complex((2, 2), rng))], "R": cx(0.4 * random_complex((2, 2), rng)),
                          "m": 0.2, "sigma": 0.8, "rho": cx(random_density(2, rng)),
                          "X": cx([[1.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.7]])})
    save("counting_d2", {"kind": "counting", "H": cx(random_hermitian(2, rng, 0.5)), "U": cx([[0, 1], [1, 0]]),
                         "mu": 1.5, "rho": cx(random_density(2, rng)), "X": cx([[1.5, 0.3], [0.3, 0.5]])})
    fam = random_projection_family(4, 2, rng)
    save("projection", {"kind": "projection", "blocks": cx(fam.blocks), "sigma": cx(random_density(4, rng)),
                        "H": cx(random_hermitian(4, rng, 0.5)), "Rs": [cx(0.3 * random_complex((4, 4), rng))]})
    save("rates", {"kind": "rates", "G": re([[-1.0, 0.5, 0.2], [0.7, -0.9, 0.3], [0.3, 0.4, -0.5]]),
                   "p0": re([1.0, 0.0, 0.0])})
    G_diag, G_up, G_down = random_birth_death_blocks(2, 14, rng)
    weights = np.zeros(15)
    weights[1] = 1.0
    save("birth_death", {"kind": "birth_death", "G_diag": [cx(g) for g in G_diag], "G_up": [cx(g) for g in G_up],
                         "G_down": [cx(g) for g in G_down], "level_weights": re(weights)})
    save("market_case1", jsonio.encode_market(reverse_engineer_case1(np.random.default_rng(11))))
    save("market_case2", jsonio.encode_market(reverse_engineer_case2(np.random.default_rng(12))))
    save("thermo_limit", jsonio.encode_market(thermo_limit_instance(np.random.default_rng(13))))


if __name__ == "__main__":
    main()
