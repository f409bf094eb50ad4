#!/usr/bin/env python3
# Copyright 2026 The CRDS Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Monte-Carlo reference for cosine preservation under uniform projection.

Draws independent unit-vector pairs in R^v, projects them through a v x w
matrix with i.i.d. U[-1, 1] entries and reports the mean absolute change in
cosine similarity. The printed value is frozen into
tests/fixtures/jl_oracle.hpp.
"""

import numpy as np

V, W, PAIRS, TRIALS, SEED = 1024, 128, 1000, 20, 20260101


def cos_rows(a, b):
    return np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))


def main():
    rng = np.random.default_rng(SEED)
    errors = []
    for _ in range(TRIALS):
        e = rng.standard_normal((PAIRS, V))
        f = rng.standard_normal((PAIRS, V))
        e /= np.linalg.norm(e, axis=1, keepdims=True)
        f /= np.linalg.norm(f, axis=1, keepdims=True)
        p = rng.uniform(-1.0, 1.0, size=(V, W))
        errors.append(np.mean(np.abs(cos_rows(e @ p, f @ p) - cos_rows(e, f))))
    print(f"mean_abs_cos_error={np.mean(errors):.6f} trial_std={np.std(errors):.6f} 1/sqrt(w)={1/np.sqrt(W):.6f}")


if __name__ == "__main__":
    main()
