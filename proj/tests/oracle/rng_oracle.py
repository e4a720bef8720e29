#!/usr/bin/env python3
# Copyright 2026 The mmpipe Authors. All rights reserved.
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


# Independent reference for SplitMix64 / xoshiro256** / Lemire bounded draws /
# Fisher-Yates. Used once to freeze golden vectors into the C++ tests.
M = (1 << 64) - 1

def splitmix64(state):
    while True:
        state = (state + 0x9E3779B97F4A7C15) & M
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
        yield z ^ (z >> 31)

def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & M

class Xoshiro:
    def __init__(self, s):
        self.s = list(s)
    @classmethod
    def from_seed(cls, seed):
        g = splitmix64(seed)
        return cls([next(g) for _ in range(4)])
    def next(self):
        s = self.s
        result = (rotl((s[1] * 5) & M, 7) * 9) & M
        t = (s[1] << 17) & M
        s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result
    def bounded(self, n):
        x = self.next(); m = x * n; lo = m & M
        if lo < n:
            t = ((1 << 64) - n) % n
            while lo < t:
                x = self.next(); m = x * n; lo = m & M
        return m >> 64

def shuffle(items, seed):
    a = list(items); g = Xoshiro.from_seed(seed)
    for i in range(len(a) - 1, 0, -1):
        j = g.bounded(i + 1)
        a[i], a[j] = a[j], a[i]
    return a

if __name__ == "__main__":
    g = splitmix64(0); print("splitmix64(0):", [hex(next(g)) for _ in range(3)])
    g = splitmix64(1234567); print("splitmix64(1234567):", [next(g) for _ in range(5)])
    x = Xoshiro([1, 2, 3, 4]); print("xoshiro{1,2,3,4}:", [x.next() for _ in range(6)])
    x = Xoshiro.from_seed(7); print("xoshiro seed 7:", [x.next() for _ in range(4)])
    x = Xoshiro.from_seed(42); print("bounded(10) seed 42:", [x.bounded(10) for _ in range(10)])
    print("shuffle5 seed 7:", shuffle(range(5), 7))
    print("shuffle5 seed 365:", shuffle(range(5), 365))
    print("shuffle10 seed 2026:", shuffle(range(10), 2026))
