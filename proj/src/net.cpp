#include "mtnet/net.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mtnet {

const char* model_kind_name(ModelKind k)
{
    switch (k) {
        case ModelKind::Maml: return "maml";
        case ModelKind::Mnet: return "mnet";
        case ModelKind::MnetFull: return "mnet_full";
        case ModelKind::Tnet: return "tnet";
        case ModelKind::Mtnet: return "mtnet";
        case ModelKind::MtnetFull: return "mtnet_full";
    }
    return "?";
}

ModelKind model_kind_from_name(const std::string& name)
{
    for (ModelKind k : {ModelKind::Maml, ModelKind::Mnet, ModelKind::MnetFull, ModelKind::Tnet,
                        ModelKind::Mtnet, ModelKind::MtnetFull})
        if (name == model_kind_name(k)) return k;
    throw std::invalid_argument("unknown model kind '" + name + "'");
}

bool model_has_transform(ModelKind k)
{
    return k == ModelKind::Tnet || k == ModelKind::Mtnet || k == ModelKind::MtnetFull;
}

bool model_has_mask(ModelKind k)
{
    return k == ModelKind::Mnet || k == ModelKind::MnetFull || k == ModelKind::Mtnet ||
           k == ModelKind::MtnetFull;
}

bool model_mask_per_weight(ModelKind k)
{
    return k == ModelKind::MnetFull || k == ModelKind::MtnetFull;
}

void Network::validate() const
{
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("Network: need at least input and output sizes");
    for (int s : layer_sizes)
        if (s <= 0) throw std::invalid_argument("Network: zero-sized layer");
}

ParamSet init_params(const Network& net, Rng& rng)
{
    net.validate();
    ParamSet params;
    params.reserve(static_cast<size_t>(net.num_cells()));
    for (int i = 0; i < net.num_cells(); ++i) {
        const int in = net.cell_in(i), out = net.cell_out(i);
        CellTensors cell;
        cell.W = truncated_normal_matrix(out, in, 1e-2, rng);
        cell.T = Tensor::identity(out);
        cell.zeta = net.mask_per_weight() ? Tensor::zeros(out, in) : Tensor::zeros(out, 1);
        params.push_back(std::move(cell));
    }
    return params;
}

std::vector<CellVars> param_leaves(Tape& tape, const Network& net, const ParamSet& params)
{
    if (static_cast<int>(params.size()) != net.num_cells())
        throw std::invalid_argument("param_leaves: cell count mismatch");
    std::vector<CellVars> cells;
    cells.reserve(params.size());
    for (const CellTensors& p : params)
        cells.push_back(CellVars{tape.constant(p.W), tape.constant(p.T), tape.constant(p.zeta)});
    return cells;
}

Var forward(const Network& net, std::span<const CellVars> cells, Var x)
{
    if (static_cast<int>(cells.size()) != net.num_cells())
        throw std::invalid_argument("forward: cell count mismatch");
    if (x.value().rows() != net.layer_sizes.front())
        throw std::invalid_argument("forward: input rows " + x.value().shape_str() +
                                    " do not match first cell");
    Var h = x;
    const int last = net.num_cells() - 1;
    for (int i = 0; i <= last; ++i) {
        h = matmul(cells[static_cast<size_t>(i)].W, h);
        if (net.has_transform()) h = matmul(cells[static_cast<size_t>(i)].T, h);
        if (i != last) h = relu(h);
    }
    return h;
}

Tensor sample_mask_hard(const Tensor& zeta, bool per_weight, int cols, Rng& rng)
{
    if (per_weight) {
        Tensor m(zeta.rows(), zeta.cols());
        for (size_t i = 0; i < m.data().size(); ++i)
            m.data()[i] = rng.uniform() < stable_sigmoid(zeta.data()[i]) ? 1.0 : 0.0;
        return m;
    }
    Tensor m(zeta.rows(), cols);
    for (int i = 0; i < zeta.rows(); ++i) {
        const double on = rng.uniform() < stable_sigmoid(zeta(i, 0)) ? 1.0 : 0.0;
        for (int j = 0; j < cols; ++j) m(i, j) = on;
    }
    return m;
}

Tensor threshold_mask(const Tensor& zeta, bool per_weight, int cols)
{
    if (per_weight) {
        Tensor m(zeta.rows(), zeta.cols());
        for (size_t i = 0; i < m.data().size(); ++i)
            m.data()[i] = stable_sigmoid(zeta.data()[i]) > 0.5 ? 1.0 : 0.0;
        return m;
    }
    Tensor m(zeta.rows(), cols);
    for (int i = 0; i < zeta.rows(); ++i) {
        const double on = stable_sigmoid(zeta(i, 0)) > 0.5 ? 1.0 : 0.0;
        for (int j = 0; j < cols; ++j) m(i, j) = on;
    }
    return m;
}

Var sample_mask_relaxed(Var zeta, bool per_weight, int cols, double temperature)
{
    Var gate = gumbel_relaxed_bernoulli(zeta, temperature);
    if (per_weight) return gate;  // zeta already W-shaped
    return broadcast_row(gate, zeta.value().rows(), cols);
}

std::vector<Tensor> sample_masks_hard(const Network& net, const ParamSet& params, Rng& rng)
{
    std::vector<Tensor> masks;
    for (int i = 0; i < net.num_cells(); ++i)
        masks.push_back(sample_mask_hard(params[static_cast<size_t>(i)].zeta,
                                         net.mask_per_weight(), net.cell_in(i), rng));
    return masks;
}

std::vector<Tensor> threshold_masks(const Network& net, const ParamSet& params)
{
    std::vector<Tensor> masks;
    for (int i = 0; i < net.num_cells(); ++i)
        masks.push_back(threshold_mask(params[static_cast<size_t>(i)].zeta,
                                       net.mask_per_weight(), net.cell_in(i)));
    return masks;
}

std::vector<Var> sample_masks_relaxed(const Network& net, std::span<const CellVars> cells,
                                      double temperature)
{
    std::vector<Var> masks;
    for (int i = 0; i < net.num_cells(); ++i)
        masks.push_back(sample_mask_relaxed(cells[static_cast<size_t>(i)].zeta,
                                            net.mask_per_weight(), net.cell_in(i), temperature));
    return masks;
}

namespace {

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t)
{
    os << "tensor " << name << " " << t.rows() << " " << t.cols() << "\n";
    char buf[40];
    for (size_t i = 0; i < t.data().size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", t.data()[i]);
        os << buf << (i + 1 == t.data().size() ? "" : " ");
    }
    os << "\n";
}

}  // namespace

void save_checkpoint(const std::string& path, const Network& net, const ParamSet& params,
                     const std::map<std::string, std::string>& meta)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os << "mtnet-checkpoint v1\n";
    os << "model " << model_kind_name(net.kind) << "\n";
    os << "layers";
    for (int s : net.layer_sizes) os << " " << s;
    os << "\n";
    for (const auto& [k, v] : meta) os << "meta " << k << " " << v << "\n";
    for (size_t i = 0; i < params.size(); ++i) {
        const std::string prefix = "cell" + std::to_string(i) + ".";
        write_tensor(os, prefix + "W", params[i].W);
        write_tensor(os, prefix + "T", params[i].T);
        write_tensor(os, prefix + "zeta", params[i].zeta);
    }
    os << "end\n";
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != "mtnet-checkpoint v1")
        throw std::runtime_error("load_checkpoint: bad header in " + path);

    Checkpoint ck;
    std::map<std::string, Tensor> tensors;
    while (std::getline(is, line)) {
        if (line == "end") break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "model") {
            std::string name;
            ls >> name;
            ck.net.kind = model_kind_from_name(name);
        } else if (tag == "layers") {
            int s;
            while (ls >> s) ck.net.layer_sizes.push_back(s);
        } else if (tag == "meta") {
            std::string key;
            ls >> key;
            std::string rest;
            std::getline(ls, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(rest.begin());
            ck.meta[key] = rest;
        } else if (tag == "tensor") {
            std::string name;
            int r = 0, c = 0;
            ls >> name >> r >> c;
            Tensor t(r, c);
            for (auto& v : t.data())
                if (!(is >> v))
                    throw std::runtime_error("load_checkpoint: truncated tensor " + name);
            std::getline(is, line);  // consume rest of the value line
            tensors[name] = std::move(t);
        } else if (!tag.empty()) {
            throw std::runtime_error("load_checkpoint: unknown tag '" + tag + "'");
        }
    }
    ck.net.validate();
    for (int i = 0; i < ck.net.num_cells(); ++i) {
        const std::string prefix = "cell" + std::to_string(i) + ".";
        CellTensors cell;
        for (const char* part : {"W", "T", "zeta"}) {
            auto it = tensors.find(prefix + part);
            if (it == tensors.end())
                throw std::runtime_error("load_checkpoint: missing tensor " + prefix + part);
            if (part[0] == 'W') cell.W = it->second;
            else if (part[0] == 'T') cell.T = it->second;
            else cell.zeta = it->second;
        }
        ck.params.push_back(std::move(cell));
    }
    return ck;
}

}  // namespace mtnet
