#include "attnroute/hub.hpp"

#include "testutil.hpp"

#include <doctest.h>

#include <memory>
#include <sstream>
#include <stdexcept>

using namespace attnroute;
namespace tu = attnroute::testutil;

namespace {

TensorF tiny(float fill = 0.0f) {
    TensorF t(1, 2, 2);
    for (size_t i = 0; i < t.numel(); ++i) {
        t.data()[i] = fill;
    }
    return t;
}

}  // namespace

TEST_CASE("dispatch requires an active run") {
    AttnHub hub;
    CHECK_THROWS_AS((void)hub.dispatch({0, ProjKind::ImgK}, tiny()), std::logic_error);
    hub.begin_run();
    hub.begin_forward();
    CHECK_NOTHROW((void)hub.dispatch({0, ProjKind::ImgK}, tiny()));
    hub.end_run();
    CHECK_THROWS_AS((void)hub.dispatch({0, ProjKind::ImgK}, tiny()), std::logic_error);
}

TEST_CASE("attach is rejected while a run is active") {
    AttnHub hub;
    hub.begin_run();
    CHECK_THROWS_AS(hub.attach(std::make_shared<tu::ScriptedOp>("late")), std::logic_error);
    hub.end_run();
    CHECK_NOTHROW(hub.attach(std::make_shared<tu::ScriptedOp>("ok")));
    CHECK(hub.ops().size() == 1);
}

TEST_CASE("attach rejects a null op") {
    AttnHub hub;
    CHECK_THROWS_AS(hub.attach(nullptr), std::invalid_argument);
}

TEST_CASE("double begin_run is an error") {
    AttnHub hub;
    hub.begin_run();
    CHECK_THROWS_AS(hub.begin_run(), std::logic_error);
}

TEST_CASE("an empty chain passes tensors through bit-exact") {
    AttnHub hub;
    hub.begin_run();
    hub.begin_forward();
    TensorF in = tu::rand_tensor(1, 4, 4, 5);
    const TensorF copy = in;
    const TensorF out = hub.dispatch({3, ProjKind::TxtV}, std::move(in));
    CHECK(out.same_bits(copy));
    CHECK(hub.firings_total() == 1);
    CHECK(hub.firings_at({3, ProjKind::TxtV}) == 1);
    CHECK(hub.firings_at({3, ProjKind::TxtQ}) == 0);
}

TEST_CASE("ops run in attachment order and see the chained tensor") {
    AttnHub hub;
    auto first = std::make_shared<tu::ScriptedOp>("first");
    first->mutate = true;
    first->delta = 1.0f;
    auto second = std::make_shared<tu::ScriptedOp>("second");
    second->mutate = true;
    second->delta = 10.0f;
    hub.attach(first);
    hub.attach(second);

    hub.begin_run();
    hub.begin_forward();
    const TensorF out = hub.dispatch({0, ProjKind::ImgV}, tiny(0.0f));
    // 0 + 1 then + 10: both deltas land, so order mattered and the second
    // op saw the first op's output.
    CHECK(out.at(0, 0, 0) == 11.0f);
    CHECK(first->seen.size() == 1);
    CHECK(second->seen.size() == 1);
    CHECK(first->modifications_total() == 1);
    CHECK(second->modifications_total() == 1);
}

TEST_CASE("dispatch context carries site, step, and forward index") {
    AttnHub hub;
    auto spy = std::make_shared<tu::ScriptedOp>("spy");
    hub.attach(spy);

    hub.begin_run();
    hub.begin_forward();
    (void)hub.dispatch({2, ProjKind::ImgQ}, tiny());
    hub.begin_forward();
    (void)hub.dispatch({2, ProjKind::ImgQ}, tiny());
    hub.advance_step();
    hub.begin_forward();
    (void)hub.dispatch({5, ProjKind::TxtK}, tiny());
    hub.end_run();

    REQUIRE(spy->seen.size() == 3);
    CHECK(spy->seen[0].site == ProjSite{2, ProjKind::ImgQ});
    CHECK(spy->seen[0].step == 0);
    CHECK(spy->seen[0].pass == 0);
    CHECK(spy->seen[1].pass == 1);
    CHECK(spy->seen[2].site == ProjSite{5, ProjKind::TxtK});
    CHECK(spy->seen[2].step == 1);
    CHECK(spy->seen[2].pass == 0);
}

TEST_CASE("firing log survives end_run and accumulates across runs") {
    AttnHub hub;
    hub.begin_run();
    hub.begin_forward();
    (void)hub.dispatch({0, ProjKind::ImgK}, tiny());
    hub.end_run();
    CHECK(hub.firings_total() == 1);

    // A second run on the same hub (the record+inject pattern) keeps
    // adding to the same log.
    hub.begin_run();
    hub.begin_forward();
    (void)hub.dispatch({0, ProjKind::ImgK}, tiny());
    hub.end_run();
    CHECK(hub.firings_total() == 2);
    CHECK(hub.firings_at({0, ProjKind::ImgK}) == 2);
}

TEST_CASE("reset clears counters and notifies ops") {
    AttnHub hub;
    auto spy = std::make_shared<tu::ScriptedOp>("spy");
    spy->mutate = true;
    hub.attach(spy);

    hub.begin_run();
    hub.begin_forward();
    (void)hub.dispatch({1, ProjKind::ImgV}, tiny());
    hub.advance_step();
    CHECK(hub.current_step() == 1);
    hub.reset();

    CHECK(!hub.run_active());
    CHECK(hub.current_step() == 0);
    CHECK(hub.firings_total() == 0);
    CHECK(spy->resets == 1);
    CHECK(spy->modifications_total() == 0);
    CHECK(hub.ops().size() == 1);  // the chain itself is preserved
}

TEST_CASE("a shape-changing op is rejected at dispatch") {
    class Mangler : public AttnOp {
      public:
        std::string name() const override { return "mangler"; }
        TensorF apply(const DispatchCtx&, TensorF) override { return TensorF(1, 1, 1); }
        bool may_modify(ProjKind) const override { return true; }
    };
    AttnHub hub;
    hub.attach(std::make_shared<Mangler>());
    hub.begin_run();
    hub.begin_forward();
    CHECK_THROWS_AS((void)hub.dispatch({0, ProjKind::ImgK}, tiny()), std::runtime_error);
}

TEST_CASE("trace breaks firings down per step and kind") {
    AttnHub hub;
    hub.set_trace(true);
    hub.begin_run();
    hub.begin_forward();
    (void)hub.dispatch({0, ProjKind::ImgK}, tiny());
    (void)hub.dispatch({0, ProjKind::ImgK}, tiny());
    hub.advance_step();
    hub.begin_forward();
    (void)hub.dispatch({0, ProjKind::TxtQ}, tiny());
    hub.end_run();

    std::ostringstream out;
    hub.dump_trace(out);
    CHECK(out.str() ==
          "step,layer,kind,fired\n"
          "0,0,ImgK,2\n"
          "1,0,TxtQ,1\n");
}

TEST_CASE("disabling trace drops collected rows") {
    AttnHub hub;
    hub.set_trace(true);
    hub.begin_run();
    hub.begin_forward();
    (void)hub.dispatch({0, ProjKind::ImgQ}, tiny());
    hub.end_run();
    hub.set_trace(false);
    std::ostringstream out;
    hub.dump_trace(out);
    CHECK(out.str() == "step,layer,kind,fired\n");
}

TEST_CASE("band containment is half-open on both axes") {
    const Band band{2, 5, 3, 7};
    CHECK(band.contains_layer(2));
    CHECK(band.contains_layer(4));
    CHECK(!band.contains_layer(5));
    CHECK(band.contains_step(3));
    CHECK(band.contains_step(6));
    CHECK(!band.contains_step(7));
    CHECK(band.contains(2, 3));
    CHECK(!band.contains(5, 3));
    CHECK(!band.contains(2, 7));
    CHECK(!band.empty());
    CHECK(Band{2, 2, 0, 5}.empty());
    CHECK(Band{0, 3, 4, 4}.empty());
    CHECK(full_band(12, 28) == Band{0, 12, 0, 28});
}

TEST_CASE("record mode flips reach every op in the chain") {
    AttnHub hub;
    auto spy = std::make_shared<tu::ScriptedOp>("spy");
    hub.attach(spy);
    for (const auto& op : hub.ops()) {
        op->set_record_mode(true);
    }
    for (const auto& op : hub.ops()) {
        op->set_record_mode(false);
    }
    CHECK(spy->record_flips == std::vector<bool>{true, false});
}
