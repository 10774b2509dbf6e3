#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : const.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 02.09.2026
# Last Modified Date: 16.10.2026

import os


class cfg:
    TESTS_DIR = os.path.dirname(os.path.abspath(__file__))

    KAPPA_LOW = 1642.0
    KAPPA_HIGH = 1825.0
    RFS_CAP = 2555.0
    MISSING_RFS = 821.0

    # Small graphs keep gradient checks and CLI runs fast
    SMALL_SHAPE = (8, 8, 8)
    SMALL_MODEL = dict(
        vision_channels=(2, 3),
        blocks_per_stage=1,
        vision_embed_dim=4,
        tabular_hidden=(4,),
        tabular_embed_dim=3,
        fusion_hidden=(4,),
        volume_shape=SMALL_SHAPE,
    )
    SMALL_SYNTH = dict(n_patients=40, volume_shape=SMALL_SHAPE, lesion_radius=(1.5, 1.5, 2.0))

    # Seeded drivers for randomized property tests
    RANDOM_SEED = 1234
    N_RANDOM = 200
