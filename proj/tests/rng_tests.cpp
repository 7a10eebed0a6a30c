#include "doctest.h"

#include <cmath>
#include <set>

#include "sgqa/rng.hpp"

using namespace sgqa;

TEST_CASE("same seed reproduces the stream, different seeds diverge") {
    Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const uint64_t x = a.next_u64();
        all_equal = all_equal && x == b.next_u64();
        any_diff = any_diff || x != c.next_u64();
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform stays in [0,1) and covers both halves") {
    Rng rng(7);
    bool low = false, high = false;
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        (u < 0.5 ? low : high) = true;
    }
    CHECK(low);
    CHECK(high);
}

TEST_CASE("derive_seed separates streams by tag and is stable") {
    const uint64_t s1 = derive_seed(5, "alpha");
    CHECK(s1 == derive_seed(5, "alpha"));
    CHECK(s1 != derive_seed(5, "beta"));
    CHECK(s1 != derive_seed(6, "alpha"));
}

TEST_CASE("shuffle permutes without losing elements") {
    Rng rng(11);
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    auto sorted = v;
    rng.shuffle(v);
    CHECK(v != sorted);  // 1/8! odds of a false alarm at this seed
    std::sort(v.begin(), v.end());
    CHECK(v == sorted);
}

TEST_CASE("normal samples have roughly standard moments") {
    Rng rng(3);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("uniform_index covers the full range") {
    Rng rng(9);
    std::set<size_t> seen;
    for (int i = 0; i < 200; ++i) seen.insert(rng.uniform_index(5));
    CHECK(seen == std::set<size_t>{0, 1, 2, 3, 4});
}
