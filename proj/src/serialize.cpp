#include "sls/serialize.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "sls/errors.hpp"

namespace sls {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'S', 'M'};
constexpr uint32_t kFormatVersion = 1;

bool host_is_little_endian() {
    const uint16_t probe = 0x1;
    unsigned char byte0;
    std::memcpy(&byte0, &probe, 1);
    return byte0 == 1;
}

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if (!host_is_little_endian()) std::reverse(buf, buf + sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
    if (!out) throw IoError("model write failed");
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw IoError("model file truncated");
    if (!host_is_little_endian()) std::reverse(buf, buf + sizeof(T));
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

} // namespace

void save_model(const Network& net, const TrainConfig& config,
                const std::filesystem::path& path) {
    net.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open model file for writing: " + path.string());

    out.write(kMagic, 4);
    write_le<uint32_t>(out, kFormatVersion);
    write_le<uint32_t>(out, static_cast<uint32_t>(net.layers.size()));
    write_le<uint64_t>(out, config.seed);
    write_le<int32_t>(out, config.epochs);
    write_le<double>(out, config.learning_rate);
    write_le<double>(out, config.beta1);
    write_le<double>(out, config.beta2);
    write_le<double>(out, config.adam_eps);
    write_le<double>(out, config.lambda);
    write_le<double>(out, config.sparsity);
    write_le<uint64_t>(out, config.batch_size);
    write_le<uint8_t>(out, config.init == InitScheme::uniform_pm1 ? 0 : 1);

    for (const auto& layer : net.layers) {
        write_le<uint32_t>(out, static_cast<uint32_t>(layer.in_dim));
        write_le<uint32_t>(out, static_cast<uint32_t>(layer.out_dim));
        write_le<uint8_t>(out, static_cast<uint8_t>(layer.activation));
        write_le<uint8_t>(out, static_cast<uint8_t>(layer.origin.kind));
        write_le<uint32_t>(out, layer.origin.model_id);
        write_le<uint32_t>(out, layer.origin.layer_index);
    }
    for (const auto& layer : net.layers) {
        for (double w : layer.weights) write_le<double>(out, w);
        for (double b : layer.biases) write_le<double>(out, b);
    }
    if (!out) throw IoError("model write failed: " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path.string());

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a model file (bad magic): " + path.string());
    const uint32_t version = read_le<uint32_t>(in);
    if (version != kFormatVersion)
        throw IoError("unsupported model format version " + std::to_string(version));

    const uint32_t n_layers = read_le<uint32_t>(in);
    if (n_layers == 0) throw IoError("model file declares zero layers");

    ModelFile file;
    file.config.seed = read_le<uint64_t>(in);
    file.config.epochs = read_le<int32_t>(in);
    file.config.learning_rate = read_le<double>(in);
    file.config.beta1 = read_le<double>(in);
    file.config.beta2 = read_le<double>(in);
    file.config.adam_eps = read_le<double>(in);
    file.config.lambda = read_le<double>(in);
    file.config.sparsity = read_le<double>(in);
    file.config.batch_size = read_le<uint64_t>(in);
    file.config.init = read_le<uint8_t>(in) == 0 ? InitScheme::uniform_pm1
                                                 : InitScheme::uniform_scaled;

    file.net.layers.reserve(n_layers);
    for (uint32_t t = 0; t < n_layers; ++t) {
        const std::size_t in_dim = read_le<uint32_t>(in);
        const std::size_t out_dim = read_le<uint32_t>(in);
        const auto act = static_cast<Activation>(read_le<uint8_t>(in));
        DenseLayer layer(in_dim, out_dim, act);
        layer.origin.kind = static_cast<LayerOrigin::Kind>(read_le<uint8_t>(in));
        layer.origin.model_id = read_le<uint32_t>(in);
        layer.origin.layer_index = read_le<uint32_t>(in);
        file.net.layers.push_back(std::move(layer));
    }
    for (auto& layer : file.net.layers) {
        for (double& w : layer.weights) w = read_le<double>(in);
        for (double& b : layer.biases) b = read_le<double>(in);
    }
    file.net.validate();
    return file;
}

} // namespace sls
