"""PRNG sequences are pinned by frozen vectors from the reference algorithms."""

from vrlayout.rng import MASK64, Xoshiro256StarStar, mix_seed, splitmix64

# First outputs of splitmix64 for state 0 (matches the published reference
# vectors, 0xE220A8397B1DCDAF, ...) and state 42.
SM64_SEED0 = [
    16294208416658607535,
    7960286522194355700,
    487617019471545679,
    17909611376780542444,
    1961750202426094747,
    6038094601263162090,
]
SM64_SEED42 = [
    13679457532755275413,
    2949826092126892291,
    5139283748462763858,
    6349198060258255764,
    701532786141963250,
    16015981125662989062,
]

# xoshiro256** seeded by filling its state from splitmix64(seed).
XO_SEED0 = [
    11091344671253066420,
    13793997310169335082,
    1900383378846508768,
    7684712102626143532,
    13521403990117723737,
    18442103541295991498,
]
XO_SEED42 = [
    1546998764402558742,
    6990951692964543102,
    12544586762248559009,
    17057574109182124193,
    18295552978065317476,
    14199186830065750584,
]
XO_SEED_BIG = [
    11399401986271211195,
    1585385652154531860,
    10005412245774160782,
    8949352449651941944,
    14139734282999090898,
    15808653711773441028,
]


def sm64_outputs(seed, n):
    state = seed
    out = []
    for _ in range(n):
        state, value = splitmix64(state)
        out.append(value)
    return out


def test_splitmix64_vectors():
    assert sm64_outputs(0, 6) == SM64_SEED0
    assert sm64_outputs(42, 6) == SM64_SEED42


def test_xoshiro_vectors():
    for seed, expected in [(0, XO_SEED0), (42, XO_SEED42),
                           (0xDEADBEEFCAFEF00D, XO_SEED_BIG)]:
        rng = Xoshiro256StarStar(seed)
        assert [rng.next_u64() for _ in range(6)] == expected


def test_outputs_stay_in_64_bits():
    rng = Xoshiro256StarStar(123)
    for _ in range(1000):
        v = rng.next_u64()
        assert 0 <= v <= MASK64


def test_same_seed_same_stream():
    a = Xoshiro256StarStar(77)
    b = Xoshiro256StarStar(77)
    assert [a.next_u64() for _ in range(50)] == [b.next_u64() for _ in range(50)]


def test_random_unit_interval():
    rng = Xoshiro256StarStar(5)
    values = [rng.random() for _ in range(2000)]
    assert all(0.0 <= v < 1.0 for v in values)
    assert 0.4 < sum(values) / len(values) < 0.6


def test_uniform_bounds():
    rng = Xoshiro256StarStar(9)
    for _ in range(500):
        v = rng.uniform(-2.0, 3.0)
        assert -2.0 <= v < 3.0


def test_randint_inclusive_range():
    rng = Xoshiro256StarStar(11)
    seen = {rng.randint(2, 5) for _ in range(500)}
    assert seen == {2, 3, 4, 5}


def test_shuffle_deterministic_permutation():
    a = list(range(20))
    b = list(range(20))
    Xoshiro256StarStar(3).shuffle(a)
    Xoshiro256StarStar(3).shuffle(b)
    assert a == b
    assert sorted(a) == list(range(20))
    assert a != list(range(20))


def test_mix_seed_xors_splitmix_of_index():
    _, z = splitmix64(7)
    assert mix_seed(100, 7) == 100 ^ z
    assert mix_seed(100, 7) != mix_seed(100, 8)
    assert mix_seed(100, 7) != mix_seed(101, 7)
