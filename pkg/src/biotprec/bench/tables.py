"""Published iteration counts used as reproduction targets.

Grids are indexed ``[tau][h]`` for the discretization tables and by the
swept parameter for the physical-parameter and jump tables.  Keys ending in
``^`` are the inexact (AMG/inner Krylov) variants.
"""

TAUS = (1e-1, 1e-2, 1e-3, 1e-4)
N_2D = (8, 16, 32, 64, 128)
N_3D = (4, 8, 16, 32)
K_SWEEP = (1.0, 1e-2, 1e-4, 1e-6, 1e-8, 1e-10)
NU_SWEEP = (0.1, 0.2, 0.4, 0.45, 0.49, 0.499)
K_JUMPS = (1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0)

MANDEL_FULL = {
    "bd": [[39, 40, 40, 40, 38], [26, 34, 39, 39, 38], [23, 23, 28, 34, 37], [21, 21, 21, 21, 21]],
    "bl": [[19, 19, 18, 17, 17], [15, 18, 19, 18, 17], [11, 12, 15, 17, 18], [11, 10, 10, 13, 15]],
    "bu": [[19, 19, 19, 18, 17], [14, 17, 18, 18, 17], [10, 11, 14, 17, 17], [8, 9, 9, 12, 14]],
    "bd^": [[39, 40, 40, 40, 36], [26, 34, 39, 39, 38], [23, 23, 23, 34, 37], [21, 22, 21, 23, 29]],
    "bl^": [[19, 20, 19, 19, 18], [15, 18, 19, 19, 18], [11, 13, 15, 17, 18], [11, 11, 11, 13, 15]],
    "bu^": [[19, 19, 19, 18, 20], [14, 17, 18, 18, 17], [10, 12, 15, 17, 17], [9, 9, 10, 12, 15]],
}

MANDEL_ELIM = {
    "bde": [[36, 40, 43, 43, 42], [26, 30, 37, 40, 40], [32, 29, 25, 31, 35], [34, 35, 31, 25, 26]],
    "ble": [[23, 23, 23, 22, 21], [17, 21, 22, 22, 22], [17, 15, 18, 21, 22], [19, 18, 16, 14, 18]],
    "bue": [[22, 23, 23, 22, 21], [16, 20, 22, 22, 21], [14, 14, 16, 20, 21], [14, 14, 14, 13, 17]],
    "bde^": [[36, 40, 43, 43, 43], [26, 30, 37, 40, 40], [32, 29, 25, 31, 35], [34, 35, 31, 25, 26]],
    "ble^": [[23, 24, 23, 22, 23], [17, 21, 22, 23, 22], [18, 15, 18, 21, 22], [19, 18, 16, 15, 18]],
    "bue^": [[22, 23, 23, 22, 21], [16, 20, 22, 22, 21], [15, 14, 17, 20, 21], [14, 14, 14, 14, 17]],
}

# h = 1/128, tau = 0.01; K sweep at nu = 0, nu sweep at K = 1e-6
MANDEL_K = {
    "bd": [23, 25, 35, 38, 29, 19], "bl": [7, 11, 15, 17, 15, 9], "bu": [13, 16, 17, 16, 15, 7],
    "bd^": [35, 33, 36, 38, 29, 19], "bl^": [14, 15, 16, 18, 15, 10], "bu^": [27, 22, 17, 17, 15, 8],
    "bde": [36, 36, 41, 42, 26, 34], "ble": [17, 17, 19, 21, 18, 16], "bue": [23, 22, 22, 21, 17, 12],
    "bde^": [36, 38, 41, 43, 26, 34], "ble^": [20, 20, 20, 23, 18, 17], "bue^": [27, 27, 22, 21, 17, 13],
}
MANDEL_NU = {
    "bd": [45, 52, 39, 36, 28, 20], "bl": [16, 19, 11, 11, 9, 10], "bu": [20, 22, 16, 14, 11, 16],
    "bd^": [45, 52, 39, 26, 23, 17], "bl^": [17, 20, 14, 12, 11, 12], "bu^": [21, 24, 17, 16, 10, 16],
    "bde": [43, 54, 44, 43, 39, 22], "ble": [20, 24, 21, 20, 17, 12], "bue": [24, 28, 23, 23, 20, 17],
    "bde^": [43, 54, 44, 43, 39, 20], "ble^": [20, 26, 22, 21, 18, 13], "bue^": [25, 28, 23, 23, 20, 17],
}

# None marks cells where the direct solver ran out of memory
FOOTING_FULL = {
    "bd": [[60, 65, 65, None], [47, 57, 68, None], [40, 42, 49, None], [40, 42, 42, None]],
    "bl": [[34, 36, 36, None], [30, 34, 37, None], [26, 28, 32, None], [24, 35, 36, None]],
    "bu": [[32, 34, 34, None], [26, 31, 35, None], [20, 23, 28, None], [20, 20, 21, None]],
    "bd^": [[60, 65, 66, 64], [47, 58, 68, 71], [42, 42, 51, 63], [40, 42, 42, 45]],
    "bl^": [[34, 36, 36, 36], [30, 34, 37, 39], [26, 28, 32, 36], [24, 25, 27, 29]],
    "bu^": [[32, 34, 34, 34], [26, 31, 35, 37], [20, 24, 28, 33], [21, 22, 23, 25]],
}
FOOTING_ELIM = {
    "bde": [[61, 65, 66, None], [54, 58, 66, None], [58, 58, 53, None], [59, 61, 60, None]],
    "ble": [[41, 41, 39, None], [39, 42, 43, None], [37, 39, 40, None], [35, 38, 38, None]],
    "bue": [[39, 39, 38, None], [33, 39, 41, None], [28, 32, 35, None], [29, 29, 30, None]],
    "bde^": [[61, 65, 66, 66], [54, 58, 66, 70], [58, 58, 53, 61], [58, 61, 60, 55]],
    "ble^": [[41, 41, 39, 39], [39, 42, 43, 43], [37, 39, 40, 43], [35, 38, 38, 38]],
    "bue^": [[40, 40, 38, 37], [33, 39, 41, 42], [28, 32, 35, 40], [29, 30, 30, 32]],
}

# h = 1/16, tau = 0.01, nu = 0.2, k = 1e-10 for x < 0.5
FOOTING_JUMP = {
    "bd": [35, 42, 84, 98, 80, 80], "bl": [24, 27, 46, 56, 51, 51], "bu": [14, 20, 38, 44, 39, 39],
    "bd^": [42, 44, 84, 98, 80, 80], "bl^": [25, 28, 46, 56, 52, 51], "bu^": [24, 22, 39, 45, 44, 44],
    "bde": [61, 62, 115, 147, 131, 132], "ble": [35, 39, 74, 84, 77, 78], "bue": [18, 27, 54, 61, 56, 57],
    "bde^": [61, 62, 115, 147, 131, 133], "ble^": [36, 39, 74, 84, 79, 79], "bue^": [29, 29, 55, 63, 61, 60],
}


def published(table, pid, inexact=False):
    return table[pid + ("^" if inexact else "")]
