#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <stdexcept>

#include "mtnet/net.hpp"

using namespace mtnet;

TEST_CASE("forward identity and hand-arithmetic cases")
{
    SUBCASE("single identity cell passes the input through")
    {
        Network net;
        net.kind = ModelKind::Tnet;
        net.layer_sizes = {2, 2};
        Tape tape(0);
        std::vector<CellVars> cells{CellVars{tape.constant(Tensor::identity(2)),
                                             tape.constant(Tensor::identity(2)),
                                             tape.constant(Tensor::zeros(2, 1))}};
        Var x = tape.constant(Tensor::column({1.0, 2.0}));
        Tensor y = forward(net, cells, x).value();
        CHECK(y(0, 0) == 1.0);
        CHECK(y(1, 0) == 2.0);
    }
    SUBCASE("two cells with a relu between them")
    {
        // T1 = 2I, W1 = I, T2 = W2 = I, x = [1, -1] -> [2, 0]
        Network net;
        net.kind = ModelKind::Tnet;
        net.layer_sizes = {2, 2, 2};
        Tape tape(0);
        std::vector<CellVars> cells{
            CellVars{tape.constant(Tensor::identity(2)),
                     tape.constant(2.0 * Tensor::identity(2)),
                     tape.constant(Tensor::zeros(2, 1))},
            CellVars{tape.constant(Tensor::identity(2)), tape.constant(Tensor::identity(2)),
                     tape.constant(Tensor::zeros(2, 1))}};
        Var x = tape.constant(Tensor::column({1.0, -1.0}));
        Tensor y = forward(net, cells, x).value();
        CHECK(y(0, 0) == 2.0);
        CHECK(y(1, 0) == 0.0);
    }
    SUBCASE("dimension chain violations are rejected")
    {
        Network net;
        net.kind = ModelKind::Maml;
        net.layer_sizes = {3, 2};
        Tape tape(0);
        std::vector<CellVars> cells{CellVars{tape.constant(Tensor(2, 3)),
                                             tape.constant(Tensor::identity(2)),
                                             tape.constant(Tensor::zeros(2, 1))}};
        Var bad = tape.constant(Tensor::column({1.0, 2.0}));
        CHECK_THROWS_AS(forward(net, cells, bad), std::invalid_argument);
    }
}

TEST_CASE("tnet forward equals a plain net with merged A = TW")
{
    Rng rng(31);
    Network tnet;
    tnet.kind = ModelKind::Tnet;
    tnet.layer_sizes = {3, 4, 2};
    Network plain;
    plain.kind = ModelKind::Maml;
    plain.layer_sizes = tnet.layer_sizes;

    for (int trial = 0; trial < 20; ++trial) {
        Tape tape(0);
        std::vector<CellVars> tnet_cells, plain_cells;
        for (int i = 0; i < tnet.num_cells(); ++i) {
            Tensor w = gaussian_matrix(tnet.cell_out(i), tnet.cell_in(i), rng);
            Tensor t = gaussian_matrix(tnet.cell_out(i), tnet.cell_out(i), rng);
            Tensor zeta = Tensor::zeros(tnet.cell_out(i), 1);
            tnet_cells.push_back(
                CellVars{tape.constant(w), tape.constant(t), tape.constant(zeta)});
            plain_cells.push_back(CellVars{tape.constant(matmul(t, w)),
                                           tape.constant(Tensor::identity(tnet.cell_out(i))),
                                           tape.constant(zeta)});
        }
        Var x = tape.constant(gaussian_matrix(3, 5, rng));
        Tensor ya = forward(tnet, tnet_cells, x).value();
        Tensor yb = forward(plain, plain_cells, x).value();
        CHECK(max_abs_diff(ya, yb) < 1e-12);
    }
}

TEST_CASE("forward is purely functional in (params, x)")
{
    Rng rng(32);
    Network net;
    net.kind = ModelKind::Mtnet;
    net.layer_sizes = {2, 8, 1};
    ParamSet params = init_params(net, rng);
    Tape t1(1), t2(2);  // different tape seeds must not matter
    Tensor x = gaussian_matrix(2, 7, rng);
    Tensor y1 = forward(net, param_leaves(t1, net, params), t1.constant(x)).value();
    Tensor y2 = forward(net, param_leaves(t2, net, params), t2.constant(x)).value();
    CHECK(bit_equal(y1, y2));
}

TEST_CASE("hard mask row frequencies track sigmoid(zeta)")
{
    Rng rng(33);
    const int draws = 10000;
    auto frequency = [&](double zeta_val) {
        Tensor zeta = Tensor::column({zeta_val});
        int ones = 0;
        for (int i = 0; i < draws; ++i) {
            Tensor m = sample_mask_hard(zeta, false, 3, rng);
            // row-granular: the whole row is equal
            CHECK(m(0, 0) == m(0, 1));
            CHECK(m(0, 1) == m(0, 2));
            ones += m(0, 0) == 1.0 ? 1 : 0;
        }
        return static_cast<double>(ones) / draws;
    };
    CHECK(frequency(50.0) == 1.0);
    CHECK(std::fabs(frequency(0.0) - 0.5) < 0.02);
    CHECK(std::fabs(frequency(1.0) - 0.731) < 0.02);
}

TEST_CASE("relaxed mask statistics")
{
    SUBCASE("entries live strictly inside (0, 1) and rows are constant")
    {
        Tape tape(34);
        Var zeta = tape.constant(Tensor::zeros(4, 1));
        Tensor m = sample_mask_relaxed(zeta, false, 5, 1.0).value();
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 5; ++j) {
                CHECK(m(i, j) > 0.0);
                CHECK(m(i, j) < 1.0);
                CHECK(m(i, j) == m(i, 0));
            }
    }
    SUBCASE("cold temperature recovers the Bernoulli coin")
    {
        Tape tape(35);
        int above = 0;
        const int draws = 10000;
        for (int i = 0; i < draws; ++i) {
            Var zeta = tape.constant(Tensor::zeros(1, 1));
            double v = sample_mask_relaxed(zeta, false, 1, 0.01).value()(0, 0);
            above += v > 0.5 ? 1 : 0;
        }
        CHECK(std::fabs(static_cast<double>(above) / draws - 0.5) < 0.02);
    }
    SUBCASE("unit temperature is symmetric around one half")
    {
        Tape tape(36);
        double sum = 0.0;
        const int draws = 10000;
        for (int i = 0; i < draws; ++i) {
            Var zeta = tape.constant(Tensor::zeros(1, 1));
            sum += sample_mask_relaxed(zeta, false, 1, 1.0).value()(0, 0);
        }
        CHECK(std::fabs(sum / draws - 0.5) < 0.02);
    }
}

TEST_CASE("per-weight masks for the -full variants")
{
    Rng rng(37);
    Network net;
    net.kind = ModelKind::MtnetFull;
    net.layer_sizes = {3, 4, 1};
    ParamSet params = init_params(net, rng);
    CHECK(params[0].zeta.rows() == 4);
    CHECK(params[0].zeta.cols() == 3);

    params[0].zeta(1, 2) = 50.0;
    params[0].zeta(2, 0) = -50.0;
    Tensor m = threshold_mask(params[0].zeta, true, 3);
    CHECK(m(1, 2) == 1.0);
    CHECK(m(2, 0) == 0.0);
    CHECK(m(0, 0) == 0.0);  // sigmoid(0) = 0.5 is not > 0.5
}

TEST_CASE("init matches the declared scheme")
{
    Rng rng(38);
    Network net;
    net.kind = ModelKind::Mtnet;
    net.layer_sizes = {2, 40, 40, 1};
    ParamSet params = init_params(net, rng);
    for (int i = 0; i < net.num_cells(); ++i) {
        const CellTensors& c = params[static_cast<size_t>(i)];
        CHECK(bit_equal(c.T, Tensor::identity(net.cell_out(i))));
        CHECK(c.zeta.max_abs() == 0.0);
        for (double v : c.W.data()) CHECK(std::fabs(v) <= 0.02);
        // zeta = 0 means a fifty-fifty update coin per row
        for (double z : c.zeta.data()) CHECK(stable_sigmoid(z) == 0.5);
    }
    Network bad;
    bad.kind = ModelKind::Maml;
    bad.layer_sizes = {2, 0, 1};
    CHECK_THROWS_AS(init_params(bad, rng), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is exact")
{
    Rng rng(39);
    Network net;
    net.kind = ModelKind::MtnetFull;
    net.layer_sizes = {2, 7, 1};
    ParamSet params = init_params(net, rng);
    // make values irrational-ish so the decimal form is exercised
    for (CellTensors& c : params) {
        c.W = std::numbers::pi * c.W;
        c.zeta = c.zeta + gaussian_matrix(c.zeta.rows(), c.zeta.cols(), rng);
    }
    const std::string path = std::filesystem::temp_directory_path() / "mtnet_ckpt_test.txt";
    save_checkpoint(path, net, params, {{"alpha", "0.01"}, {"note", "round trip"}});
    Checkpoint ck = load_checkpoint(path);
    CHECK(ck.net.kind == net.kind);
    CHECK(ck.net.layer_sizes == net.layer_sizes);
    CHECK(ck.meta.at("alpha") == "0.01");
    CHECK(ck.meta.at("note") == "round trip");
    REQUIRE(ck.params.size() == params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        CHECK(bit_equal(ck.params[i].W, params[i].W));
        CHECK(bit_equal(ck.params[i].T, params[i].T));
        CHECK(bit_equal(ck.params[i].zeta, params[i].zeta));
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.txt"), std::runtime_error);
}

TEST_CASE("model menu flags")
{
    CHECK_FALSE(model_has_transform(ModelKind::Maml));
    CHECK_FALSE(model_has_mask(ModelKind::Maml));
    CHECK(model_has_mask(ModelKind::Mnet));
    CHECK_FALSE(model_has_transform(ModelKind::Mnet));
    CHECK(model_has_transform(ModelKind::Tnet));
    CHECK_FALSE(model_has_mask(ModelKind::Tnet));
    CHECK(model_has_mask(ModelKind::MtnetFull));
    CHECK(model_mask_per_weight(ModelKind::MtnetFull));
    CHECK_FALSE(model_mask_per_weight(ModelKind::Mtnet));
    CHECK(model_kind_from_name("mtnet_full") == ModelKind::MtnetFull);
    CHECK_THROWS_AS(model_kind_from_name("resnet"), std::invalid_argument);
}
