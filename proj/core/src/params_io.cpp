#include "salience/params_io.hpp"

#include "salience/common.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "parameter container assumes a little-endian host");

namespace salience {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'L', 'P'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint8_t kDtypeFloat64 = 0;

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError("parameter container truncated");
    return value;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

} // namespace

void write_params_file(const std::string& path, const std::vector<const nn::Params*>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);

    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, kFormatVersion);
    write_pod<std::uint64_t>(out, params.size());

    for (const nn::Params* p : params) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod<std::uint8_t>(out, kDtypeFloat64);
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rank()));
        for (std::size_t d : p->value.shape()) write_pod<std::uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!out) throw DataError("failed writing parameter container: " + path);
}

void read_params_file(const std::string& path, const std::vector<nn::Params*>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open parameter container: " + path);

    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a parameter container: " + path);
    if (read_pod<std::uint32_t>(in) != kFormatVersion)
        throw DataError("unsupported parameter container version");

    auto count = read_pod<std::uint64_t>(in);
    std::map<std::string, nn::Tensor> records;
    for (std::uint64_t r = 0; r < count; ++r) {
        auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (read_pod<std::uint8_t>(in) != kDtypeFloat64)
            throw DataError("unsupported dtype in parameter container");
        auto rank = read_pod<std::uint32_t>(in);
        std::vector<std::size_t> shape;
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(in)));
            total *= shape.back();
        }
        nn::Tensor tensor(shape);
        in.read(reinterpret_cast<char*>(tensor.data()),
                static_cast<std::streamsize>(total * sizeof(double)));
        if (!in) throw DataError("parameter container truncated in " + name);
        records.emplace(std::move(name), std::move(tensor));
    }

    for (nn::Params* p : params) {
        auto it = records.find(p->name);
        if (it == records.end()) throw DataError("parameter missing from container: " + p->name);
        if (!it->second.same_shape(p->value))
            throw DataError("parameter shape mismatch for " + p->name);
        p->value = it->second;
    }
}

BundlePaths save_model_bundle(const std::string& directory, const std::string& name,
                              NetworkModel& model, const std::vector<std::string>& vocabulary,
                              const ScalingStats& scaling, bool encoder_only) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);

    BundlePaths paths;
    paths.manifest = (fs::path(directory) / (name + ".manifest.txt")).string();
    paths.params = (fs::path(directory) / (name + ".params.bin")).string();
    paths.scaling = (fs::path(directory) / (name + ".scaling.csv")).string();

    auto param_list = encoder_only ? model.encoder_params() : model.params();
    std::vector<const nn::Params*> const_params(param_list.begin(), param_list.end());
    write_params_file(paths.params, const_params);
    write_scaling_file(paths.scaling, scaling);

    std::ofstream out(paths.manifest, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + paths.manifest);
    const ModelSpec& spec = model.spec();
    out << "kind = " << to_string(spec.kind) << "\n";
    out << "layers = " << spec.layers << "\n";
    out << "units = " << spec.units << "\n";
    out << "embedding_dim = " << spec.embedding_dim << "\n";
    out << "l1 = " << spec.l1 << "\n";
    out << "l2 = " << spec.l2 << "\n";
    out << "learning_rate = " << spec.learning_rate << "\n";
    out << "median_halflife = " << spec.median_halflife << "\n";
    out << "encoder_only = " << (encoder_only ? 1 : 0) << "\n";
    out << "params_file = " << name << ".params.bin\n";
    out << "scaling_file = " << name << ".scaling.csv\n";
    out << "vocabulary =";
    for (const auto& v : vocabulary) out << ' ' << v;
    out << "\n";
    out << "layer_order =";
    for (const nn::Params* p : const_params) out << ' ' << p->name;
    out << "\n";
    return paths;
}

LoadedBundle load_model_bundle(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest: " + manifest_path);

    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError("manifest missing key: " + key);
        return it->second;
    };

    ModelSpec spec;
    spec.kind = model_kind_from_string(need("kind"));
    spec.layers = std::stoi(need("layers"));
    spec.units = std::stoi(need("units"));
    spec.embedding_dim = std::stoi(need("embedding_dim"));
    spec.l1 = std::stod(need("l1"));
    spec.l2 = std::stod(need("l2"));
    spec.learning_rate = std::stod(need("learning_rate"));
    spec.median_halflife = std::stod(need("median_halflife"));

    LoadedBundle bundle;
    bundle.encoder_only = need("encoder_only") == "1";
    {
        std::istringstream vs(need("vocabulary"));
        std::string token;
        while (vs >> token) bundle.vocabulary.push_back(token);
    }
    if (bundle.vocabulary.empty()) throw DataError("manifest has an empty vocabulary");

    fs::path dir = fs::path(manifest_path).parent_path();
    bundle.scaling = read_scaling_file((dir / need("scaling_file")).string());
    bundle.model = std::make_unique<NetworkModel>(spec, bundle.vocabulary.size(), 0);

    auto params = bundle.encoder_only ? bundle.model->encoder_params() : bundle.model->params();
    read_params_file((dir / need("params_file")).string(), params);
    return bundle;
}

} // namespace salience
