// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/scene_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

namespace splatjoint {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kBlobMagic[4] = {'S', 'J', 'S', 'C'};

struct BlobWriter {
  std::vector<char> bytes;
  ordered_json sections = ordered_json::object();

  void add(const std::string& name, const void* data, std::size_t len) {
    sections[name] = {{"offset", bytes.size()}, {"length", len}};
    const char* p = static_cast<const char*>(data);
    bytes.insert(bytes.end(), p, p + len);
  }
  void add_floats(const std::string& name, const std::vector<float>& v) {
    add(name, v.data(), v.size() * sizeof(float));
  }
};

struct BlobReader {
  std::vector<char> bytes;
  const ordered_json* sections = nullptr;

  std::pair<const char*, std::size_t> section(const std::string& name) const {
    if (!sections->contains(name)) throw FormatError("missing blob section " + name);
    const auto& s = (*sections)[name];
    const std::size_t off = s.at("offset").get<std::size_t>();
    const std::size_t len = s.at("length").get<std::size_t>();
    if (off + len > bytes.size()) throw FormatError("blob section " + name + " out of range");
    return {bytes.data() + off, len};
  }
  bool has(const std::string& name) const { return sections->contains(name); }

  std::vector<float> floats(const std::string& name, std::size_t expected_count) const {
    auto [p, len] = section(name);
    if (len != expected_count * sizeof(float))
      throw DimensionError("section " + name + " holds " +
                           std::to_string(len / sizeof(float)) + " floats, expected " +
                           std::to_string(expected_count));
    std::vector<float> out(expected_count);
    std::memcpy(out.data(), p, len);
    return out;
  }
};

std::vector<std::uint32_t> rle_encode(const std::vector<std::uint8_t>& bitmap) {
  // Alternating run lengths, first run counts zeros.
  std::vector<std::uint32_t> runs;
  std::uint8_t current = 0;
  std::uint32_t len = 0;
  for (std::uint8_t b : bitmap) {
    const std::uint8_t v = b ? 1 : 0;
    if (v == current) {
      ++len;
    } else {
      runs.push_back(len);
      current = v;
      len = 1;
    }
  }
  runs.push_back(len);
  return runs;
}

std::vector<std::uint8_t> rle_decode(const std::uint32_t* runs, std::size_t n_runs,
                                     std::size_t total) {
  std::vector<std::uint8_t> bitmap;
  bitmap.reserve(total);
  std::uint8_t current = 0;
  for (std::size_t i = 0; i < n_runs; ++i) {
    bitmap.insert(bitmap.end(), runs[i], current);
    current = current ? 0 : 1;
  }
  if (bitmap.size() != total) throw FormatError("mask RLE does not cover the bitmap");
  return bitmap;
}

ordered_json camera_json(const Camera& cam) {
  const Quat q = canonicalized(cam.world_to_camera.rotation);
  return {{"fx", cam.fx},
          {"fy", cam.fy},
          {"cx", cam.cx},
          {"cy", cam.cy},
          {"width", cam.width},
          {"height", cam.height},
          {"rotation", {q.w(), q.x(), q.y(), q.z()}},
          {"translation",
           {cam.world_to_camera.translation.x(), cam.world_to_camera.translation.y(),
            cam.world_to_camera.translation.z()}}};
}

Camera camera_from_json(const ordered_json& j) {
  Camera cam;
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  const auto& r = j.at("rotation");
  cam.world_to_camera.rotation = Quat(r[0].get<double>(), r[1].get<double>(),
                                      r[2].get<double>(), r[3].get<double>());
  const auto& t = j.at("translation");
  cam.world_to_camera.translation =
      Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
  return cam;
}

}  // namespace

void save_scene(const SceneState& state, const std::string& path) {
  const std::size_t P = state.gaussians.size();
  int sh_coeffs = 0;
  if (P > 0) sh_coeffs = static_cast<int>(state.gaussians[0].sh.cols());
  for (const auto& g : state.gaussians) {
    if (g.sh.cols() != sh_coeffs)
      throw DimensionError("all gaussians in a scene must share the SH coefficient count");
    if (g.latent.size() != state.d_latent)
      throw DimensionError("gaussian latent dim does not match scene d_latent");
  }

  BlobWriter blob;
  {
    std::vector<float> pos(P * 3), rot(P * 4), scl(P * 3), opa(P);
    std::vector<float> sh(P * 3 * sh_coeffs), lat(P * state.d_latent);
    std::vector<std::int32_t> lab(P);
    for (std::size_t i = 0; i < P; ++i) {
      const auto& g = state.gaussians[i];
      for (int k = 0; k < 3; ++k) pos[i * 3 + k] = static_cast<float>(g.position[k]);
      // Stored raw: canonicalization renormalizes and would break the
      // byte-identical round trip through float32.
      const Quat& q = g.rotation;
      rot[i * 4 + 0] = static_cast<float>(q.w());
      rot[i * 4 + 1] = static_cast<float>(q.x());
      rot[i * 4 + 2] = static_cast<float>(q.y());
      rot[i * 4 + 3] = static_cast<float>(q.z());
      for (int k = 0; k < 3; ++k) scl[i * 3 + k] = static_cast<float>(g.scale[k]);
      opa[i] = static_cast<float>(g.opacity);
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < sh_coeffs; ++k)
          sh[(i * 3 + c) * sh_coeffs + k] = static_cast<float>(g.sh(c, k));
      for (int k = 0; k < state.d_latent; ++k)
        lat[i * state.d_latent + k] = static_cast<float>(g.latent[k]);
      lab[i] = g.label;
    }
    blob.add_floats("positions", pos);
    blob.add_floats("rotations", rot);
    blob.add_floats("scales", scl);
    blob.add_floats("opacities", opa);
    blob.add_floats("sh", sh);
    blob.add_floats("latents", lat);
    blob.add("labels", lab.data(), lab.size() * sizeof(std::int32_t));
  }

  ordered_json views_meta = ordered_json::array();
  for (std::size_t vi = 0; vi < state.views.size(); ++vi) {
    const View& v = state.views[vi];
    ordered_json meta = camera_json(v.camera);
    meta["has_depth"] = v.has_depth();
    views_meta.push_back(meta);
    const std::string prefix = "view" + std::to_string(vi);
    std::vector<float> img(v.image.pixels.size() * 3);
    for (std::size_t pi = 0; pi < v.image.pixels.size(); ++pi)
      for (int c = 0; c < 3; ++c) img[pi * 3 + c] = v.image.pixels[pi][c];
    blob.add_floats(prefix + "/image", img);
    if (v.has_depth()) blob.add_floats(prefix + "/depth", v.depth);
  }

  ordered_json masks_meta = ordered_json::array();
  for (std::size_t mi = 0; mi < state.masks.size(); ++mi) {
    const Mask2D& m = state.masks[mi];
    const bool has_px = m.pixel_features.size() != 0;
    masks_meta.push_back({{"view_id", m.view_id},
                          {"mask_id", m.mask_id},
                          {"level", m.level == MaskLevel::Part ? "part" : "instance"},
                          {"pixel_count", m.pixel_count()},
                          {"has_pixel_features", has_px}});
    const std::string prefix = "mask" + std::to_string(mi);
    const auto runs = rle_encode(m.bitmap);
    blob.add(prefix + "/rle", runs.data(), runs.size() * sizeof(std::uint32_t));
    std::vector<float> feat(m.feature.size());
    for (Eigen::Index k = 0; k < m.feature.size(); ++k) feat[k] = m.feature[k];
    blob.add_floats(prefix + "/feature", feat);
    if (has_px) {
      std::vector<float> pf(static_cast<std::size_t>(m.pixel_features.size()));
      for (Eigen::Index c = 0; c < m.pixel_features.cols(); ++c)
        for (Eigen::Index r = 0; r < m.pixel_features.rows(); ++r)
          pf[static_cast<std::size_t>(c) * m.pixel_features.rows() + r] = m.pixel_features(r, c);
      blob.add_floats(prefix + "/pixfeat", pf);
    }
  }

  ordered_json manifest;
  manifest["format"] = "splatjoint-scene";
  manifest["version"] = kSceneFormatVersion;
  manifest["tag"] = state.tag == StateTag::TPrime ? "t_prime" : "t";
  manifest["dims"] = {{"d_latent", state.d_latent},
                      {"d_feat", state.d_feat},
                      {"d_dense", state.d_dense},
                      {"sh_coeffs", sh_coeffs}};
  manifest["counts"] = {{"gaussians", P},
                        {"views", state.views.size()},
                        {"masks", state.masks.size()}};
  manifest["views"] = views_meta;
  manifest["masks"] = masks_meta;
  manifest["sections"] = blob.sections;

  fs::create_directories(path);
  {
    std::ofstream f(fs::path(path) / "manifest.json", std::ios::binary);
    f << manifest.dump(2) << "\n";
    if (!f) throw FormatError("failed to write manifest.json under " + path);
  }
  {
    std::ofstream f(fs::path(path) / "blobs.bin", std::ios::binary);
    f.write(kBlobMagic, 4);
    const std::uint32_t version = kSceneFormatVersion;
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(blob.bytes.data(), static_cast<std::streamsize>(blob.bytes.size()));
    if (!f) throw FormatError("failed to write blobs.bin under " + path);
  }
}

SceneState load_scene(const std::string& path) {
  ordered_json manifest;
  {
    std::ifstream f(fs::path(path) / "manifest.json", std::ios::binary);
    if (!f) throw FormatError("cannot open manifest.json under " + path);
    try {
      manifest = ordered_json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("manifest parse failure: ") + e.what());
    }
  }
  if (manifest.value("format", "") != "splatjoint-scene")
    throw FormatError("not a splatjoint scene manifest");
  if (manifest.value("version", -1) != kSceneFormatVersion)
    throw FormatError("unsupported scene format version");

  BlobReader blob;
  {
    std::ifstream f(fs::path(path) / "blobs.bin", std::ios::binary);
    if (!f) throw FormatError("cannot open blobs.bin under " + path);
    char magic[4];
    std::uint32_t version = 0;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&version), 4);
    if (!f || std::memcmp(magic, kBlobMagic, 4) != 0)
      throw FormatError("bad blob magic");
    if (version != static_cast<std::uint32_t>(kSceneFormatVersion))
      throw FormatError("blob version does not match manifest");
    blob.bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  blob.sections = &manifest.at("sections");

  SceneState state;
  state.tag = manifest.value("tag", "t") == "t_prime" ? StateTag::TPrime : StateTag::T;
  const auto& dims = manifest.at("dims");
  state.d_latent = dims.at("d_latent").get<int>();
  state.d_feat = dims.at("d_feat").get<int>();
  state.d_dense = dims.at("d_dense").get<int>();
  const int sh_coeffs = dims.at("sh_coeffs").get<int>();
  const auto& counts = manifest.at("counts");
  const std::size_t P = counts.at("gaussians").get<std::size_t>();

  const auto pos = blob.floats("positions", P * 3);
  const auto rot = blob.floats("rotations", P * 4);
  const auto scl = blob.floats("scales", P * 3);
  const auto opa = blob.floats("opacities", P);
  const auto sh = blob.floats("sh", P * 3 * sh_coeffs);
  const auto lat = blob.floats("latents", P * state.d_latent);
  auto [lab_ptr, lab_len] = blob.section("labels");
  if (lab_len != P * sizeof(std::int32_t)) throw DimensionError("labels section length mismatch");

  state.gaussians.resize(P);
  for (std::size_t i = 0; i < P; ++i) {
    auto& g = state.gaussians[i];
    g.position = Vec3(pos[i * 3], pos[i * 3 + 1], pos[i * 3 + 2]);
    g.rotation = Quat(rot[i * 4], rot[i * 4 + 1], rot[i * 4 + 2], rot[i * 4 + 3]);
    if (g.rotation.w() < 0.0) g.rotation.coeffs() = -g.rotation.coeffs();  // exact flip
    g.scale = Vec3(scl[i * 3], scl[i * 3 + 1], scl[i * 3 + 2]);
    g.opacity = opa[i];
    g.sh.resize(3, sh_coeffs);
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < sh_coeffs; ++k) g.sh(c, k) = sh[(i * 3 + c) * sh_coeffs + k];
    g.latent.resize(state.d_latent);
    for (int k = 0; k < state.d_latent; ++k) g.latent[k] = lat[i * state.d_latent + k];
    std::int32_t label;
    std::memcpy(&label, lab_ptr + i * sizeof(std::int32_t), sizeof(std::int32_t));
    g.label = label;
  }

  const auto& views_meta = manifest.at("views");
  state.views.resize(views_meta.size());
  for (std::size_t vi = 0; vi < views_meta.size(); ++vi) {
    View& v = state.views[vi];
    v.camera = camera_from_json(views_meta[vi]);
    const std::size_t n = static_cast<std::size_t>(v.camera.width) * v.camera.height;
    const std::string prefix = "view" + std::to_string(vi);
    const auto img = blob.floats(prefix + "/image", n * 3);
    v.image.width = v.camera.width;
    v.image.height = v.camera.height;
    v.image.pixels.resize(n);
    for (std::size_t pi = 0; pi < n; ++pi)
      v.image.pixels[pi] = Eigen::Vector3f(img[pi * 3], img[pi * 3 + 1], img[pi * 3 + 2]);
    if (views_meta[vi].value("has_depth", false)) v.depth = blob.floats(prefix + "/depth", n);
  }

  const auto& masks_meta = manifest.at("masks");
  state.masks.resize(masks_meta.size());
  for (std::size_t mi = 0; mi < masks_meta.size(); ++mi) {
    Mask2D& m = state.masks[mi];
    const auto& meta = masks_meta[mi];
    m.view_id = meta.at("view_id").get<int>();
    m.mask_id = meta.at("mask_id").get<int>();
    m.level = meta.at("level").get<std::string>() == "part" ? MaskLevel::Part
                                                            : MaskLevel::Instance;
    if (m.view_id < 0 || m.view_id >= static_cast<int>(state.views.size()))
      throw FormatError("mask references missing view");
    m.width = state.views[m.view_id].camera.width;
    m.height = state.views[m.view_id].camera.height;
    const std::string prefix = "mask" + std::to_string(mi);
    auto [rle_ptr, rle_len] = blob.section(prefix + "/rle");
    m.bitmap = rle_decode(reinterpret_cast<const std::uint32_t*>(rle_ptr),
                          rle_len / sizeof(std::uint32_t),
                          static_cast<std::size_t>(m.width) * m.height);
    const auto feat = blob.floats(prefix + "/feature", state.d_feat);
    m.feature.resize(state.d_feat);
    for (int k = 0; k < state.d_feat; ++k) m.feature[k] = feat[k];
    if (meta.value("has_pixel_features", false)) {
      const std::size_t npx = m.pixel_count();
      if (npx != meta.at("pixel_count").get<std::size_t>())
        throw DimensionError("mask pixel_count disagrees with RLE bitmap");
      const auto pf = blob.floats(prefix + "/pixfeat", npx * state.d_dense);
      m.pixel_features.resize(state.d_dense, npx);
      for (std::size_t c = 0; c < npx; ++c)
        for (int r = 0; r < state.d_dense; ++r)
          m.pixel_features(r, static_cast<Eigen::Index>(c)) = pf[c * state.d_dense + r];
    }
  }

  state.validate();
  return state;
}

}  // namespace splatjoint
