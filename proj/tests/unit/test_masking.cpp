#include <doctest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "tabrad/errors.hpp"
#include "tabrad/masking.hpp"

using namespace tabrad;

namespace {

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
    std::uint64_t c = 1;
    for (std::uint64_t i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

// Index tuples of size k in lexicographic order.
void combinations(std::size_t d, std::size_t k, std::size_t start, std::vector<std::size_t>& cur,
                  std::vector<std::vector<std::size_t>>& out) {
    if (cur.size() == k) {
        out.push_back(cur);
        return;
    }
    for (std::size_t j = start; j < d; ++j) {
        cur.push_back(j);
        combinations(d, k, j + 1, cur, out);
        cur.pop_back();
    }
}

std::vector<std::size_t> masked_indices(const MaskVector& m) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < m.size(); ++j)
        if (m.bits[j]) idx.push_back(j);
    return idx;
}

}  // namespace

TEST_SUITE("masking") {

TEST_CASE("deterministic bank examples") {
    const auto b = build_deterministic_bank(3, 1);
    REQUIRE(b.size() == 3);
    CHECK(b.masks[0].bits == std::vector<std::uint8_t>{1, 0, 0});
    CHECK(b.masks[1].bits == std::vector<std::uint8_t>{0, 1, 0});
    CHECK(b.masks[2].bits == std::vector<std::uint8_t>{0, 0, 1});
    CHECK(build_deterministic_bank(6, 1).size() == 6);
    CHECK(deterministic_bank_size(13, 3) == 13 + 78 + 286);
    CHECK(build_deterministic_bank(13, 3).size() == 377);
}

TEST_CASE("deterministic bank is exactly the lexicographic combination list") {
    for (std::size_t d = 1; d <= 12; ++d) {
        for (std::size_t r = 1; r <= d; ++r) {
            std::vector<std::vector<std::size_t>> expected;
            std::uint64_t count = 0;
            for (std::size_t k = 1; k <= r; ++k) {
                std::vector<std::size_t> cur;
                combinations(d, k, 0, cur, expected);
                count += choose(d, k);
            }
            const auto bank = build_deterministic_bank(d, r);
            REQUIRE(bank.size() == count);
            CHECK(deterministic_bank_size(d, r) == count);
            bool same = true;
            std::vector<int> covered(d, 0);
            for (std::size_t i = 0; i < bank.size(); ++i) {
                same = same && masked_indices(bank.masks[i]) == expected[i];
                for (auto j : masked_indices(bank.masks[i])) covered[j] = 1;
            }
            CHECK_MESSAGE(same, "d=" << d << " r=" << r);
            CHECK(std::all_of(covered.begin(), covered.end(), [](int c) { return c == 1; }));
        }
    }
}

TEST_CASE("deterministic bank rejects invalid ranks") {
    CHECK_THROWS(build_deterministic_bank(3, 0));
    CHECK_THROWS(build_deterministic_bank(3, 4));
}

TEST_CASE("training mask distribution") {
    Rng rng = make_rng(1, 10);
    std::size_t set_bits = 0;
    for (int i = 0; i < 1000; ++i) set_bits += sample_training_mask(5, 1e-12, rng).popcount();
    CHECK(set_bits == 0);

    std::vector<std::size_t> freq(4, 0);
    const std::size_t draws = 100000;
    for (std::size_t i = 0; i < draws; ++i) {
        const auto m = sample_training_mask(4, 0.25, rng);
        for (std::size_t j = 0; j < 4; ++j) freq[j] += m.bits[j];
    }
    for (auto f : freq) {
        const double p = static_cast<double>(f) / draws;
        CHECK(p >= 0.245);
        CHECK(p <= 0.255);
    }

    Rng a = make_rng(7, 10), b = make_rng(7, 10);
    CHECK(sample_training_mask(9, 0.3, a) == sample_training_mask(9, 0.3, b));
}

TEST_CASE("random bank") {
    const auto bank = build_random_bank(6, deterministic_bank_size(6, 1), 0.15, 4);
    CHECK(bank.size() == 6);
    for (const auto& m : bank.masks) CHECK(m.popcount() >= 1);
    const auto again = build_random_bank(6, 6, 0.15, 4);
    CHECK(bank.masks == again.masks);
    const auto sparse = build_random_bank(10, 200, 0.01, 1);
    CHECK(sparse.size() == 200);
    for (const auto& m : sparse.masks) CHECK(m.popcount() >= 1);
}

TEST_CASE("batch masks force fully observed samples") {
    Rng rng = make_rng(3, 10);
    for (std::size_t batch : {1, 5, 10, 37, 500}) {
        const auto masks = sample_batch_masks(batch, 4, 0.9, 0.1, rng);
        REQUIRE(masks.size() == batch);
        const auto zero = static_cast<std::size_t>(
            std::count_if(masks.begin(), masks.end(), [](const MaskVector& m) { return m.popcount() == 0; }));
        CHECK(zero >= std::max<std::size_t>(1, batch / 10));
    }
}

TEST_CASE("masked and observed parts add back to the sample") {
    std::mt19937_64 src(1);
    for (const auto& m : build_deterministic_bank(5, 5).masks) {
        const auto x = oracle::random_values(5, src);
        const auto [hidden, seen] = split_by_mask(x, m);
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(hidden[j] + seen[j] == x[j]);
            CHECK((m.bits[j] ? seen[j] : hidden[j]) == 0.0);
        }
    }
}

}  // TEST_SUITE
