// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmcast/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>

#include "tmcast/error.hpp"

namespace tmcast::io {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'T', 'M', 'C', 'A', 'S', 'T', 'C', 'K'};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw NumericError("SHA-256 initialization failed");
  }
  void update(const void* data, std::size_t size) {
    if (size > 0) EVP_DigestUpdate(ctx_.get(), data, size);
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx_;
};

void hash_tensor(Sha256& h, const std::string& name, const nn::Tensor& t) {
  h.update(name.data(), name.size());
  const char nul = 0;
  h.update(&nul, 1);
  for (std::int64_t d : t.shape()) h.update(&d, sizeof d);
  h.update(t.data(), static_cast<std::size_t>(t.size()) * sizeof(double));
}

struct Archive {
  nlohmann::json header;
  std::vector<double> blob;
};

Archive read_archive(const std::filesystem::path& path, bool with_data) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw ValidationError(path.string() + " is not a checkpoint file");
  if (version != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  if (header_len > (1ULL << 32)) throw ValidationError("checkpoint header is implausibly large");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ValidationError("truncated checkpoint header");
  Archive a;
  try {
    a.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (with_data) {
    const std::uint64_t count = a.header.at("data_count").get<std::uint64_t>();
    a.blob.resize(count);
    in.read(reinterpret_cast<char*>(a.blob.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw ValidationError("truncated checkpoint data");
  }
  return a;
}

// Copies the stored tensors of `section` into `store`, verifying shapes and
// the section checksum afterwards.
void restore_section(const Archive& a, const nlohmann::json& section, nn::ParamStore& store) {
  const std::string name = section.at("name").get<std::string>();
  for (const auto& t : section.at("tensors")) {
    const std::string tname = t.at("name").get<std::string>();
    const nn::ParamEntry* entry = store.find(name, tname);
    if (!entry)
      throw ValidationError("checkpoint tensor " + name + "/" + tname + " has no model parameter");
    const auto shape = t.at("shape").get<nn::Shape>();
    if (shape != entry->var.shape())
      throw ValidationError("checkpoint tensor " + name + "/" + tname + " has shape " +
                            nn::to_string(shape) + ", model expects " +
                            nn::to_string(entry->var.shape()));
    const auto offset = t.at("offset").get<std::uint64_t>();
    const auto count = static_cast<std::uint64_t>(nn::numel(shape));
    if (offset + count > a.blob.size()) throw ValidationError("checkpoint tensor out of bounds");
    nn::Var v = entry->var;
    std::memcpy(v.mutable_value().data(), a.blob.data() + offset, count * sizeof(double));
  }
  std::size_t expected = 0;
  for (const auto& e : store.entries())
    if (e.section == name) ++expected;
  if (expected != section.at("tensors").size())
    throw ValidationError("checkpoint section " + name + " tensor count differs from the model");
  if (section_checksum(store, name) != section.at("sha256").get<std::string>())
    throw ValidationError("checkpoint section " + name + " failed its SHA-256 check");
}

}  // namespace

std::string sha256_hex(const void* data, std::size_t size) {
  Sha256 h;
  h.update(data, size);
  return h.hex();
}

std::string section_checksum(const nn::ParamStore& store, const std::string& section) {
  Sha256 h;
  for (const auto& e : store.entries())
    if (e.section == section) hash_tensor(h, e.name, e.var.value());
  return h.hex();
}

void save_checkpoint(const std::filesystem::path& path, const model::Forecaster& model,
                     const nlohmann::json& config_snapshot, const nlohmann::json& metadata) {
  const nn::ParamStore& store = model.params();
  nlohmann::json header;
  header["format"] = "tmcast-checkpoint";
  header["version"] = kCheckpointVersion;
  header["config"] = config_snapshot;
  header["metadata"] = metadata;
  std::vector<const nn::Tensor*> order;
  std::uint64_t offset = 0;
  nlohmann::json sections = nlohmann::json::array();
  for (const std::string& s : store.sections()) {
    nlohmann::json sec;
    sec["name"] = s;
    sec["tensors"] = nlohmann::json::array();
    for (const auto& e : store.entries()) {
      if (e.section != s) continue;
      sec["tensors"].push_back({{"name", e.name},
                                {"shape", e.var.shape()},
                                {"offset", offset},
                                {"trainable", e.trainable}});
      offset += static_cast<std::uint64_t>(e.var.value().size());
      order.push_back(&e.var.value());
    }
    sec["sha256"] = section_checksum(store, s);
    sections.push_back(std::move(sec));
  }
  const auto& betas = model.schedule().betas();
  header["sections"] = std::move(sections);
  header["schedule"] = {{"kind", "linear"},
                        {"steps", betas.size()},
                        {"offset", offset},
                        {"sha256", sha256_hex(betas.data(), betas.size() * sizeof(double))}};
  offset += betas.size();
  header["data_count"] = offset;

  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t header_len = text.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const nn::Tensor* t : order)
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * static_cast<std::int64_t>(sizeof(double))));
  out.write(reinterpret_cast<const char*>(betas.data()),
            static_cast<std::streamsize>(betas.size() * sizeof(double)));
  out.close();
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  return read_archive(path, false).header;
}

nlohmann::json inspect_checkpoint(const std::filesystem::path& path) {
  const Archive a = read_archive(path, true);
  nlohmann::json out;
  out["path"] = path.string();
  out["format"] = a.header.at("format");
  out["version"] = a.header.at("version");
  out["metadata"] = a.header.value("metadata", nlohmann::json::object());
  out["sections"] = nlohmann::json::array();
  bool all_ok = true;
  for (const auto& section : a.header.at("sections")) {
    Sha256 h;
    std::uint64_t trainable = 0, frozen = 0;
    for (const auto& t : section.at("tensors")) {
      const auto shape = t.at("shape").get<nn::Shape>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto count = static_cast<std::uint64_t>(nn::numel(shape));
      if (offset + count > a.blob.size()) throw ValidationError("checkpoint tensor out of bounds");
      const std::string name = t.at("name").get<std::string>();
      h.update(name.data(), name.size());
      const char nul = 0;
      h.update(&nul, 1);
      for (std::int64_t d : shape) h.update(&d, sizeof d);
      h.update(a.blob.data() + offset, count * sizeof(double));
      (t.at("trainable").get<bool>() ? trainable : frozen) += count;
    }
    const std::string digest = h.hex();
    const bool ok = digest == section.at("sha256").get<std::string>();
    all_ok = all_ok && ok;
    out["sections"].push_back({{"name", section.at("name")},
                               {"tensors", section.at("tensors").size()},
                               {"trainable", trainable},
                               {"frozen", frozen},
                               {"sha256", digest},
                               {"verified", ok}});
  }
  const auto& sched = a.header.at("schedule");
  const auto steps = sched.at("steps").get<std::uint64_t>();
  const auto offset = sched.at("offset").get<std::uint64_t>();
  if (offset + steps > a.blob.size()) throw ValidationError("checkpoint schedule out of bounds");
  const bool sched_ok = sha256_hex(a.blob.data() + offset, steps * sizeof(double)) ==
                        sched.at("sha256").get<std::string>();
  out["schedule"] = {{"kind", sched.at("kind")}, {"steps", steps}, {"verified", sched_ok}};
  out["verified"] = all_ok && sched_ok;
  out["config"] = a.header.at("config");
  return out;
}

void load_parameters(const std::filesystem::path& path, model::Forecaster& model) {
  const Archive a = read_archive(path, true);
  std::vector<std::string> seen;
  for (const auto& section : a.header.at("sections")) {
    restore_section(a, section, model.params());
    seen.push_back(section.at("name").get<std::string>());
  }
  for (const std::string& s : model.params().sections())
    if (std::find(seen.begin(), seen.end(), s) == seen.end())
      throw ValidationError("checkpoint lacks section " + s);
  const auto& sched = a.header.at("schedule");
  const auto steps = sched.at("steps").get<std::uint64_t>();
  const auto offset = sched.at("offset").get<std::uint64_t>();
  if (offset + steps > a.blob.size()) throw ValidationError("checkpoint schedule out of bounds");
  std::vector<double> betas(a.blob.begin() + static_cast<std::ptrdiff_t>(offset),
                            a.blob.begin() + static_cast<std::ptrdiff_t>(offset + steps));
  if (sha256_hex(betas.data(), betas.size() * sizeof(double)) !=
      sched.at("sha256").get<std::string>())
    throw ValidationError("checkpoint schedule failed its SHA-256 check");
  model.set_schedule(diffusion::NoiseSchedule::from_betas(std::move(betas)));
}

void load_backbone_section(const std::filesystem::path& path, nn::ParamStore& store) {
  const Archive a = read_archive(path, true);
  for (const auto& section : a.header.at("sections"))
    if (section.at("name") == "backbone") {
      restore_section(a, section, store);
      return;
    }
  throw ValidationError(path.string() + " has no backbone section");
}

}  // namespace tmcast::io
