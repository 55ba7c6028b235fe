"""Standalone SplitMix64 reference (Steele, Lea & Flood 2014; java.util.SplittableRandom).

Prints the frozen tables used by the C++ rng tests. Independent of the C++ code.
"""
MASK = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def mix_gamma(z):
    z = ((z ^ (z >> 33)) * 0xFF51AFD7ED558CCD) & MASK
    z = ((z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53) & MASK
    z = (z ^ (z >> 33)) | 1
    n = bin(z ^ (z >> 1)).count("1")
    return z ^ 0xAAAAAAAAAAAAAAAA if n < 24 else z


class SplitMix64:
    def __init__(self, seed, gamma=GOLDEN_GAMMA):
        self.seed = seed & MASK
        self.gamma = gamma

    def next_seed(self):
        self.seed = (self.seed + self.gamma) & MASK
        return self.seed

    def next_u64(self):
        return mix64(self.next_seed())

    def split(self):
        return SplitMix64(self.next_u64(), mix_gamma(self.next_seed()))


def keyed(seed, k1, k2):
    z = mix64((seed + GOLDEN_GAMMA) & MASK)
    z = mix64(z ^ (k1 & MASK))
    z = mix64(z ^ (k2 & MASK))
    return SplitMix64(z)


if __name__ == "__main__":
    for s in (0, 1, 2):
        g = SplitMix64(s)
        print(f"seed {s}:", ", ".join(f"0x{g.next_u64():016x}" for _ in range(16)))
    for s in (0, 1, 2):
        g = SplitMix64(s)
        kids = [g.split() for _ in range(3)]
        print(f"splits of {s}:", ", ".join(f"0x{k.next_u64():016x}" for k in kids),
              "| gammas:", ", ".join(f"0x{k.gamma:016x}" for k in kids))
    for k in [(1, 3, 2), (1, 0, 0), (1, 0, 1)]:
        print("keyed", k, f"0x{keyed(*k).next_u64():016x}")
