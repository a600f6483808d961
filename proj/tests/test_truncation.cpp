#include "popcheck/formula.hpp"
#include "popcheck/transient.hpp"
#include "popcheck/truncation.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace popcheck;

namespace {

const ModelSpec& pure_birth()
{
    static const ModelSpec spec = parse_model("population N = 0\n1 ; N += 1\n");
    return spec;
}

Truncation birth_chain(int k)
{
    Truncation tr(pure_birth());
    tr.add_state(State{0});
    for (int i = 0; i < k; ++i) {
        const auto f = tr.frontier();
        tr.extend(f);
    }
    return tr;
}

} // namespace

TEST(Truncation, ExtendProteinInitialState)
{
    const auto spec = testing_support::model("protein_synthesis.mpm");
    Truncation tr(spec);
    const StateIndex s0 = tr.add_state(spec.init);
    tr.extend(std::vector<StateIndex>{s0});
    ASSERT_EQ(tr.explored_count(), 1u);
    ASSERT_EQ(tr.frontier_count(), 1u);
    EXPECT_EQ(tr.state_vector(tr.explored()[0]), (State{0, 0}));
    EXPECT_EQ(tr.state_vector(tr.frontier()[0]), (State{1, 0}));
    EXPECT_DOUBLE_EQ(tr.exit_rate(s0), 1.0);
}

TEST(Truncation, ExtendWithNothingIsIdentity)
{
    Truncation tr = birth_chain(3);
    tr.extend(std::vector<StateIndex>{});
    EXPECT_EQ(tr.explored_count(), 3u);
    EXPECT_EQ(tr.frontier_count(), 1u);
}

TEST(Truncation, PureBirthChain)
{
    const Truncation tr = birth_chain(10);
    EXPECT_EQ(tr.explored_count(), 10u);
    ASSERT_EQ(tr.frontier_count(), 1u);
    EXPECT_EQ(tr.state_vector(tr.frontier()[0]), State{10});
    EXPECT_EQ(tr.depth(0), 10u);
}

TEST(Truncation, DepthWithoutFrontier)
{
    const auto spec = parse_model("population N = 0\n");
    Truncation tr(spec);
    tr.extend(std::vector<StateIndex>{tr.add_state(State{0})});
    EXPECT_EQ(tr.depth(0), Truncation::kNoFrontier);
}

TEST(Truncation, FrontierLabelsAreUnknown)
{
    Truncation tr = birth_chain(4);
    const auto f = parse_formula("N >= 2", pure_birth());
    const std::size_t ap = tr.register_ap(std::get<node::Atomic>(f->v).prop);
    EXPECT_EQ(tr.label(ap, 0), Ternary::False);
    EXPECT_EQ(tr.label(ap, *tr.index_of(State{3})), Ternary::True);
    EXPECT_EQ(tr.label(ap, *tr.index_of(State{4})), Ternary::Unknown);
    // Labels follow later extensions.
    tr.extend(tr.frontier());
    EXPECT_EQ(tr.label(ap, *tr.index_of(State{4})), Ternary::True);
    EXPECT_EQ(tr.label(ap, *tr.index_of(State{5})), Ternary::Unknown);
}

TEST(Truncation, AbsorbingView)
{
    // a -> b -> c with b absorbing: c is unreachable from a.
    const auto spec = parse_model("population N = 0\n2 - N ; N += 1\n");
    Truncation tr(spec);
    tr.add_state(State{0});
    tr.extend(tr.frontier());
    tr.extend(tr.frontier());
    tr.extend(tr.frontier());
    ASSERT_EQ(tr.explored_count(), 3u);
    const StateIndex b = *tr.index_of(State{1}), c = *tr.index_of(State{2});
    const auto view = make_absorbing(tr, std::vector<StateIndex>{b});
    const auto dist = transient_dist(view, 0, 50.0, 1e-12);
    EXPECT_EQ(dist.value[c], 0.0);
    EXPECT_NEAR(dist.value[b], 1.0, 1e-9);

    // An empty absorbing set leaves the rows unchanged.
    const SparseRows plain = tr.rows(), same = AbsorbingView(tr).rows();
    EXPECT_EQ(plain.col, same.col);
    EXPECT_EQ(plain.exit, same.exit);
}

TEST(Truncation, IndicesStableUnderExtension)
{
    Truncation tr = birth_chain(3);
    const auto before = tr.state_vector(2);
    tr.extend(tr.frontier());
    EXPECT_EQ(tr.state_vector(2), before);
    EXPECT_EQ(*tr.index_of(State{3}), 3u);
}
