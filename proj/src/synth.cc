#include "groundhog/synth.h"

#include <algorithm>
#include <set>
#include <tuple>

#include "groundhog/errors.h"
#include "groundhog/rng.h"

namespace groundhog {
namespace {

constexpr std::string_view kSystemMessage =
    "A chat between a curious user and an artificial intelligence assistant.";

constexpr std::array<std::string_view, 5> kGcapTemplates = {
    "Describe the image briefly.",
    "Describe the image in a few words.",
    "Describe the image in a short sentence.",
    "Generate a short caption for the picture.",
    "Caption the image in a few words.",
};

constexpr std::array<std::string_view, 8> kResTemplates = {
    "Segment: {}.",
    "Help me segment out {}.",
    "Help me localize {}.",
    "Help me highlight the region of {}.",
    "Identify and mark the region of {} for me.",
    "Can you extract the segment: {} for me?",
    "Could you please segment out {} in the image?",
    "Show me where to find {} in this photo.",
};

// The first template takes "a red square", the second "red square".
constexpr std::array<std::string_view, 2> kPresenceTemplates = {
    "Is {} present in the image?",
    "Is there any {} in this image?",
};

constexpr std::array<std::string_view, 2> kCountTemplates = {
    "Count the number of {}.",
    "How many {} can you see in this image?",
};

constexpr std::array<std::string_view, 6> kRdTemplates = {
    "Describe the region <PTR> in a few words.",
    "Describe it <PTR>.",
    "Describe the selected area <PTR>.",
    "Give a short caption for this <PTR>.",
    "Provide a distinct description for that <PTR>",
    "What can you see in this area <PTR>?",
};

// Response scaffolds; "{}" marks where generated words go.
constexpr std::array<std::string_view, 12> kResponseWords = {
    "Here it is: <GRD> {} </GRD>",
    "Sorry, there is no <GRD> {} </GRD> in the image.",
    "I see <GRD> {} </GRD>, <GRD> {} </GRD> and <GRD> {} </GRD>.",
    "I see nothing.",
    "Yes, there is <GRD> a {} </GRD>.",
    "Yes, there are <GRD> two {} </GRD>.",
    "No.",
    "There are no {}.",
    "There is one <GRD> {} </GRD>.",
    "There are two <GRD> {} </GRD>.",
    "It is <GRD> {} </GRD>.",
    "both the tip of",
};

std::string fill(std::string_view tmpl, std::string_view value) {
  std::string out(tmpl);
  const auto pos = out.find("{}");
  if (pos != std::string::npos) out.replace(pos, 2, value);
  return out;
}

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& items, Rng& rng) {
  return items[rng.below(N)];
}

std::string color_name(int c) { return std::string(kColorNames.at(c)); }

std::string full_expr(const Entity& e) {
  return "the " + color_name(e.color) + " " + std::string(to_string(e.shape)) +
         " " + std::string(region_phrase(e.region));
}

std::string indefinite_expr(const Entity& e) {
  return "a " + color_name(e.color) + " " + std::string(to_string(e.shape)) +
         " " + std::string(region_phrase(e.region));
}

std::string part_expr(const Entity& e, const Part& p) {
  return "the " + p.name + " of " + full_expr(e);
}

// Offsets (dy, dx) of a shape anchored at its bounding-box origin.
std::vector<std::pair<int, int>> shape_pixels(Shape shape, Rng& rng) {
  std::vector<std::pair<int, int>> px;
  switch (shape) {
    case Shape::kSquare: {
      const int side = rng.range(5, 8);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) px.emplace_back(y, x);
      break;
    }
    case Shape::kDisc: {
      const int r = rng.range(3, 4);
      for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x)
          if (y * y + x * x <= r * r + r) px.emplace_back(y + r, x + r);
      break;
    }
    case Shape::kTriangle: {
      const int t = rng.range(6, 9);
      const int half_base = (t - 1) / 2;
      for (int y = 0; y < t; ++y) {
        const int half = y / 2;
        for (int x = half_base - half; x <= half_base + half; ++x)
          px.emplace_back(y, x);
      }
      break;
    }
  }
  return px;
}

BinaryMask shift_mask(const BinaryMask& m, int dy, int dx) {
  BinaryMask out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m.at(r, c)) continue;
      const int rr = r + dy, cc = c + dx;
      if (rr >= 0 && rr < m.height() && cc >= 0 && cc < m.width()) out.set(rr, cc);
    }
  }
  return out;
}

bool neighbor_set(const BinaryMask& m, int r, int c) {
  return r >= 0 && r < m.height() && c >= 0 && c < m.width() && m.at(r, c);
}

BinaryMask dilate(const BinaryMask& m) {
  BinaryMask out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c)
      if (m.at(r, c) || neighbor_set(m, r - 1, c) || neighbor_set(m, r + 1, c) ||
          neighbor_set(m, r, c - 1) || neighbor_set(m, r, c + 1))
        out.set(r, c);
  return out;
}

BinaryMask erode(const BinaryMask& m) {
  BinaryMask out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c)
      if (m.at(r, c) && neighbor_set(m, r - 1, c) && neighbor_set(m, r + 1, c) &&
          neighbor_set(m, r, c - 1) && neighbor_set(m, r, c + 1))
        out.set(r, c);
  return out;
}

BinaryMask half_of(const BinaryMask& m, int which) {
  const Box b = mask_to_box(m);
  BinaryMask out(m.height(), m.width());
  const int mid_x = b.x0 + (b.x1 - b.x0) / 2;
  const int mid_y = b.y0 + (b.y1 - b.y0) / 2;
  for (int r = b.y0; r < b.y1; ++r) {
    for (int c = b.x0; c < b.x1; ++c) {
      if (!m.at(r, c)) continue;
      const bool keep = which == 0 ? c < mid_x
                        : which == 1 ? c >= mid_x
                        : which == 2 ? r < mid_y
                                     : r >= mid_y;
      if (keep) out.set(r, c);
    }
  }
  return out;
}

// Builds the assistant turn; spans are attached to <GRD> pairs in order.
Turn assistant_turn(std::string text, std::vector<GroundedSpan> spans) {
  Turn t{Role::kAssistant, std::move(text), std::move(spans), {}};
  const auto words = split_words(t.text);
  std::size_t k = 0;
  for (int i = 0; i < static_cast<int>(words.size()); ++i) {
    if (words[i] == kGrdToken) {
      if (k >= t.spans.size()) throw Error("response has more spans than given");
      t.spans[k].grd_start = i;
    } else if (words[i] == kGrdEndToken) {
      t.spans[k++].grd_end = i;
    }
  }
  if (k != t.spans.size()) throw Error("response has fewer spans than given");
  return t;
}

GroundedSpan make_span(const std::vector<BinaryMask>& masks, Supervision sup) {
  GroundedSpan s;
  s.supervision = sup;
  if (sup == Supervision::kMask) {
    s.masks = masks;
  } else if (sup == Supervision::kBox) {
    for (const auto& m : masks) s.boxes.push_back(mask_to_box(m));
  }
  return s;
}

std::vector<std::size_t> entities_with(const Scene& scene, int color, Shape shape) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scene.entities.size(); ++i)
    if (scene.entities[i].color == color && scene.entities[i].shape == shape)
      out.push_back(i);
  return out;
}

}  // namespace

std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::kSquare: return "square";
    case Shape::kDisc: return "disc";
    case Shape::kTriangle: return "triangle";
  }
  return "square";
}

std::string_view plural(Shape s) {
  switch (s) {
    case Shape::kSquare: return "squares";
    case Shape::kDisc: return "discs";
    case Shape::kTriangle: return "triangles";
  }
  return "squares";
}

std::string_view to_string(Region r) { return r == Region::kSky ? "sky" : "ground"; }

std::string_view region_phrase(Region r) {
  return r == Region::kSky ? "in the sky" : "on the ground";
}

Shape shape_from_string(std::string_view s) {
  for (Shape sh : kAllShapes)
    if (to_string(sh) == s) return sh;
  throw DataError("unknown shape '" + std::string(s) + "'");
}

Region region_from_string(std::string_view s) {
  if (s == "sky") return Region::kSky;
  if (s == "ground") return Region::kGround;
  throw DataError("unknown region '" + std::string(s) + "'");
}

int color_from_string(std::string_view s) {
  for (int c = 0; c < kNumColors; ++c)
    if (kColorNames[c] == s) return c;
  throw DataError("unknown color '" + std::string(s) + "'");
}

std::vector<int> Scene::labels() const {
  std::vector<int> out(static_cast<std::size_t>(height) * width, 0);
  for (std::size_t e = 0; e < entities.size(); ++e) {
    const auto& bits = entities[e].mask.bits();
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) out[i] = static_cast<int>(e) + 1;
  }
  return out;
}

Scene gen_scene(std::uint64_t seed, const SceneConfig& config) {
  if (config.n_entities < 0) throw InvalidArgument("n_entities must be >= 0");
  if (static_cast<int>(config.required.size()) > config.n_entities) {
    throw InvalidArgument("more required entities than n_entities");
  }
  Rng rng(seed);
  Scene scene;
  scene.colors.assign(static_cast<std::size_t>(scene.height) * scene.width, 0);
  BinaryMask occupied(scene.height, scene.width);
  std::set<std::tuple<int, Shape, Region>> used;

  std::vector<EntitySpec> specs = config.required;
  specs.resize(static_cast<std::size_t>(config.n_entities));
  for (const EntitySpec& spec : specs) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_retries && !placed; ++attempt) {
      const int color = spec.color ? *spec.color : rng.range(0, kNumColors - 1);
      const Shape shape = spec.shape ? *spec.shape : kAllShapes[rng.below(3)];
      const Region region =
          spec.region ? *spec.region : (rng.bernoulli(0.5) ? Region::kSky : Region::kGround);
      if (config.unique_attributes && used.contains({color, shape, region})) continue;
      const auto px = shape_pixels(shape, rng);
      int sh = 0, sw = 0;
      for (auto [y, x] : px) {
        sh = std::max(sh, y + 1);
        sw = std::max(sw, x + 1);
      }
      const int band_lo = region == Region::kSky ? 0 : scene.horizon;
      const int band_hi = region == Region::kSky ? scene.horizon : scene.height;
      if (band_hi - band_lo < sh) continue;
      const int top = rng.range(band_lo, band_hi - sh);
      const int left = rng.range(0, scene.width - sw);
      BinaryMask mask(scene.height, scene.width);
      for (auto [y, x] : px) mask.set(top + y, left + x);
      // One pixel of clearance keeps entity boundaries visible.
      const BinaryMask grown = dilate(mask);
      bool clash = false;
      for (std::size_t i = 0; i < grown.size() && !clash; ++i)
        clash = grown.bits()[i] && occupied.bits()[i];
      if (clash) continue;
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask.bits()[i]) scene.colors[i] = static_cast<std::uint8_t>(color + 1);
      }
      for (int r = 0; r < scene.height; ++r)
        for (int c = 0; c < scene.width; ++c)
          if (mask.at(r, c)) occupied.set(r, c);
      Entity e{std::move(mask), color, shape, region, {}};
      if (config.allow_parts && shape == Shape::kTriangle) {
        BinaryMask tip(scene.height, scene.width);
        const int tip_rows = std::max(1, sh / 3);
        for (auto [y, x] : px)
          if (y < tip_rows) tip.set(top + y, left + x);
        e.parts.push_back({"tip", std::move(tip)});
      }
      scene.entities.push_back(std::move(e));
      used.insert({color, shape, region});
      placed = true;
    }
    if (!placed) {
      throw Error("gen_scene: could not place entity within retry budget");
    }
  }
  return scene;
}

ProposalSet gen_proposals(const Scene& scene, const PerturbSpec& perturb,
                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BinaryMask> masks;
  std::vector<ProposalTag> tags;
  for (const auto& e : scene.entities) {
    masks.push_back(e.mask);
    tags.push_back(ProposalTag::kOracle);
  }
  for (const auto& e : scene.entities) {
    for (const auto& p : e.parts) {
      masks.push_back(p.mask);
      tags.push_back(ProposalTag::kOracle);
    }
  }
  if (perturb.enabled() && !scene.entities.empty()) {
    std::vector<int> kinds;
    if (perturb.shift_px > 0) kinds.push_back(0);
    if (perturb.dilate) kinds.push_back(1);
    if (perturb.erode) kinds.push_back(2);
    if (perturb.split) kinds.push_back(3);
    for (int i = 0; i < perturb.n_distractors; ++i) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        const auto& parent = scene.entities[rng.below(scene.entities.size())].mask;
        BinaryMask m;
        switch (kinds[rng.below(kinds.size())]) {
          case 0: {
            int dy = 0, dx = 0;
            while (dy == 0 && dx == 0) {
              dy = (rng.range(0, 2) - 1) * perturb.shift_px;
              dx = (rng.range(0, 2) - 1) * perturb.shift_px;
            }
            m = shift_mask(parent, dy, dx);
            break;
          }
          case 1:
            m = dilate(parent);
            break;
          case 2:
            m = erode(parent);
            break;
          default:
            m = half_of(parent, rng.range(0, 3));
            break;
        }
        if (m.empty() || std::find(masks.begin(), masks.end(), m) != masks.end())
          continue;
        masks.push_back(std::move(m));
        tags.push_back(ProposalTag::kDistractor);
        break;
      }
    }
  }
  std::vector<std::size_t> order(masks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (perturb.shuffle) rng.shuffle(std::span(order));
  ProposalSet out;
  for (std::size_t i : order) out.add(SoftMask::from_binary(masks[i]), tags[i]);
  return out;
}

std::pair<FeatureMap, FeatureMap> encode_backbones(const Scene& scene) {
  const int gh = kFeatureGrid, gw = kFeatureGrid;
  const int bh = scene.height / gh, bw = scene.width / gw;
  const double area = static_cast<double>(bh) * bw;
  FeatureMap a(kBackboneADim, gh, gw);
  FeatureMap b(kBackboneBDim, gh, gw);
  const std::vector<int> label = scene.labels();
  auto lab = [&](int r, int c) { return label[static_cast<std::size_t>(r) * scene.width + c]; };
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      const int g_r = r / bh, g_c = c / bw;
      const int color = scene.colors[static_cast<std::size_t>(r) * scene.width + c];
      if (color > 0) {
        a.at(color - 1, g_r, g_c) += 1.0 / area;
        b.at(0, g_r, g_c) += 1.0 / area;
      }
      if (r + 1 < scene.height && lab(r, c) != lab(r + 1, c)) b.at(1, g_r, g_c) += 1.0 / area;
      if (c + 1 < scene.width && lab(r, c) != lab(r, c + 1)) b.at(2, g_r, g_c) += 1.0 / area;
      if (scene.region_at(r) == Region::kGround) b.at(3, g_r, g_c) += 1.0 / area;
    }
  }
  return {std::move(a), std::move(b)};
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::kGcap: return "GCAP";
    case Task::kRes: return "RES";
    case Task::kGvqa: return "GVQA";
    case Task::kRd: return "RD";
  }
  return "RES";
}

Task task_from_string(std::string_view s) {
  if (s == "GCAP") return Task::kGcap;
  if (s == "RES") return Task::kRes;
  if (s == "GVQA") return Task::kGvqa;
  if (s == "RD") return Task::kRd;
  throw DataError("unknown task '" + std::string(s) + "'");
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::kSystem;
  if (s == "user") return Role::kUser;
  if (s == "assistant") return Role::kAssistant;
  throw DataError("unknown role '" + std::string(s) + "'");
}

std::string_view to_string(Supervision s) {
  switch (s) {
    case Supervision::kNone: return "none";
    case Supervision::kMask: return "mask";
    case Supervision::kBox: return "box";
  }
  return "none";
}

Supervision supervision_from_string(std::string_view s) {
  if (s == "none") return Supervision::kNone;
  if (s == "mask") return Supervision::kMask;
  if (s == "box") return Supervision::kBox;
  throw DataError("unknown supervision '" + std::string(s) + "'");
}

std::string serialize_conversation(const GroundedConversation& c) {
  std::string out;
  bool open = false;
  for (const Turn& t : c.turns) {
    switch (t.role) {
      case Role::kSystem:
        out += t.text + " ";
        break;
      case Role::kUser:
        if (!open) {
          out += std::string(kBosToken);
          open = true;
        }
        out += " USER: " + t.text;
        break;
      case Role::kAssistant:
        out += " ASSISTANT: " + t.text + " " + std::string(kEosToken);
        break;
    }
  }
  return out;
}

void validate(const GroundedConversation& c, const Vocabulary& vocab) {
  auto fail = [&](const std::string& msg) {
    throw DataError("conversation " + std::to_string(c.id) + ": " + msg);
  };
  const Scene& s = c.scene;
  if (s.colors.size() != static_cast<std::size_t>(s.height) * s.width)
    fail("scene color raster has wrong length");
  for (std::size_t i = 0; i < s.entities.size(); ++i) {
    const auto& m = s.entities[i].mask;
    if (m.height() != s.height || m.width() != s.width) fail("entity mask size");
    if (m.empty()) fail("empty entity mask");
    for (std::size_t j = 0; j < i; ++j) {
      if (iou_mask(m, s.entities[j].mask) > 0.0) fail("overlapping entity masks");
    }
  }
  if (!c.proposals.empty() &&
      (c.proposals.height() != s.height || c.proposals.width() != s.width))
    fail("proposal size differs from scene");
  bool seen_user = false;
  bool expect_user = true;
  for (std::size_t ti = 0; ti < c.turns.size(); ++ti) {
    const Turn& t = c.turns[ti];
    std::vector<int> ids;
    try {
      ids = vocab.tokenize(t.text);
    } catch (const DataError& e) {
      fail(e.what());
    }
    if (t.role == Role::kSystem) {
      if (ti != 0) fail("system turn must come first");
      continue;
    }
    if ((t.role == Role::kUser) != expect_user) fail("turns must alternate user/assistant");
    expect_user = !expect_user;
    const auto n_ptr = std::count(ids.begin(), ids.end(), kPtrId);
    if (t.role == Role::kUser) {
      seen_user = true;
      if (!t.spans.empty()) fail("grounded spans are only allowed in assistant turns");
      if (static_cast<std::size_t>(n_ptr) != t.pointers.size())
        fail("pointer count does not match <PTR> occurrences");
      if (n_ptr > 0 && c.proposals.empty()) fail("pointers need proposals");
      if (std::count(ids.begin(), ids.end(), kGrdId) ||
          std::count(ids.begin(), ids.end(), kGrdEndId))
        fail("grounding tokens in a user turn");
      continue;
    }
    if (n_ptr > 0 || !t.pointers.empty()) fail("pointers in an assistant turn");
    std::vector<std::pair<int, int>> pairs;
    int open = -1;
    for (int i = 0; i < static_cast<int>(ids.size()); ++i) {
      if (ids[i] == kGrdId) {
        if (open >= 0) fail("nested <GRD>");
        open = i;
      } else if (ids[i] == kGrdEndId) {
        if (open < 0) fail("</GRD> without <GRD>");
        pairs.emplace_back(open, i);
        open = -1;
      }
    }
    if (open >= 0) fail("unclosed <GRD>");
    if (pairs.size() != t.spans.size()) fail("span count does not match <GRD> pairs");
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const GroundedSpan& sp = t.spans[k];
      if (sp.grd_start != pairs[k].first || sp.grd_end != pairs[k].second)
        fail("span token positions do not match <GRD> pairs");
      if (sp.supervision != Supervision::kNone && c.proposals.empty())
        fail("grounded span without proposals");
      switch (sp.supervision) {
        case Supervision::kNone:
          if (!sp.masks.empty() || !sp.boxes.empty()) fail("unsupervised span carries targets");
          break;
        case Supervision::kMask:
          if (!sp.boxes.empty()) fail("mask span carries boxes");
          for (const auto& m : sp.masks)
            if (m.height() != s.height || m.width() != s.width) fail("span mask size");
          break;
        case Supervision::kBox:
          if (!sp.masks.empty()) fail("box span carries masks");
          for (const auto& b : sp.boxes)
            if (b.x1 > s.width || b.y1 > s.height) fail("span box outside raster");
          break;
      }
    }
  }
  if (!seen_user || !expect_user) fail("conversation must end with an assistant turn");
}

GroundedConversation make_conversation(const Scene& scene,
                                       const ProposalSet& proposals, Task task,
                                       std::uint64_t template_seed,
                                       const TaskOptions& options) {
  Rng rng(template_seed);
  const Supervision sup = options.supervision;
  GroundedConversation c;
  c.task = task;
  c.scene = scene;
  c.proposals = proposals;
  c.source = std::string(to_string(task)) + "_" +
             (sup == Supervision::kBox ? "box" : "mask");
  for (auto& ch : c.source) ch = static_cast<char>(std::tolower(ch));
  if (options.system_message) c.turns.push_back({Role::kSystem, std::string(kSystemMessage), {}, {}});
  const auto& ents = scene.entities;
  auto need = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("make_conversation: ") + what);
  };

  switch (task) {
    case Task::kRes: {
      const ResKind kind = options.res_kind.value_or(ResKind::kSingle);
      std::string expr;
      std::vector<BinaryMask> targets;
      bool negative = false;
      if (kind == ResKind::kSingle) {
        need(!ents.empty(), "RES needs at least one entity");
        const Entity& e = ents[rng.below(ents.size())];
        expr = full_expr(e);
        targets.push_back(e.mask);
      } else if (kind == ResKind::kMulti) {
        std::vector<std::pair<int, Shape>> pairs;
        for (int col = 0; col < kNumColors; ++col)
          for (Shape sh : kAllShapes)
            if (entities_with(scene, col, sh).size() >= 2) pairs.emplace_back(col, sh);
        need(!pairs.empty(), "multi-target RES needs two entities sharing color and shape");
        const auto [col, sh] = pairs[rng.below(pairs.size())];
        expr = "both " + color_name(col) + " " + std::string(plural(sh));
        for (std::size_t i : entities_with(scene, col, sh)) targets.push_back(ents[i].mask);
      } else if (kind == ResKind::kNegative) {
        std::vector<std::tuple<int, Shape, Region>> absent;
        for (int col = 0; col < kNumColors; ++col)
          for (Shape sh : kAllShapes)
            for (Region rg : {Region::kSky, Region::kGround}) {
              bool present = false;
              for (const auto& e : ents)
                present |= e.color == col && e.shape == sh && e.region == rg;
              if (!present) absent.emplace_back(col, sh, rg);
            }
        const auto [col, sh, rg] = absent[rng.below(absent.size())];
        expr = "the " + color_name(col) + " " + std::string(to_string(sh)) + " " +
               std::string(region_phrase(rg));
        negative = true;
      } else {
        std::vector<std::pair<std::size_t, std::size_t>> parts;
        for (std::size_t i = 0; i < ents.size(); ++i)
          for (std::size_t p = 0; p < ents[i].parts.size(); ++p) parts.emplace_back(i, p);
        need(!parts.empty(), "part RES needs an entity with parts");
        const auto [ei, pi] = parts[rng.below(parts.size())];
        expr = part_expr(ents[ei], ents[ei].parts[pi]);
        targets.push_back(ents[ei].parts[pi].mask);
      }
      c.turns.push_back({Role::kUser, fill(pick(kResTemplates, rng), expr), {}, {}});
      const std::string reply =
          negative ? "Sorry, there is no <GRD> " + expr + " </GRD> in the image."
                   : "Here it is: <GRD> " + expr + " </GRD>";
      c.turns.push_back(assistant_turn(reply, {make_span(targets, sup)}));
      break;
    }
    case Task::kGcap: {
      c.turns.push_back({Role::kUser, std::string(pick(kGcapTemplates, rng)), {}, {}});
      if (ents.empty()) {
        c.turns.push_back(assistant_turn("I see nothing.", {}));
        break;
      }
      std::string reply = "I see";
      std::vector<GroundedSpan> spans;
      for (std::size_t i = 0; i < ents.size(); ++i) {
        if (i > 0) reply += (i + 1 == ents.size()) ? " and" : ",";
        reply += " <GRD> " + indefinite_expr(ents[i]) + " </GRD>";
        spans.push_back(make_span({ents[i].mask}, sup));
      }
      reply += ".";
      c.turns.push_back(assistant_turn(reply, std::move(spans)));
      break;
    }
    case Task::kGvqa: {
      const VqaKind kind = options.vqa_kind.value_or(VqaKind::kPresence);
      std::vector<std::pair<int, Shape>> present, absent, doubled;
      for (int col = 0; col < kNumColors; ++col)
        for (Shape sh : kAllShapes) {
          const auto n = entities_with(scene, col, sh).size();
          (n > 0 ? present : absent).emplace_back(col, sh);
          if (n >= 2) doubled.emplace_back(col, sh);
        }
      if (kind == VqaKind::kPresence) {
        const bool positive = options.vqa_positive.value_or(rng.bernoulli(0.5));
        need(!positive || !present.empty(), "positive presence question needs an entity");
        const auto& pool = positive ? present : absent;
        const auto [col, sh] = pool[rng.below(pool.size())];
        const std::string noun = color_name(col) + " " + std::string(to_string(sh));
        const bool with_article = rng.bernoulli(0.5);
        const std::string q = with_article ? fill(kPresenceTemplates[0], "a " + noun)
                                           : fill(kPresenceTemplates[1], noun);
        c.turns.push_back({Role::kUser, q, {}, {}});
        if (!positive) {
          c.turns.push_back(assistant_turn("No.", {}));
          break;
        }
        std::vector<BinaryMask> targets;
        for (std::size_t i : entities_with(scene, col, sh)) targets.push_back(ents[i].mask);
        const std::string reply =
            targets.size() == 1
                ? "Yes, there is <GRD> a " + noun + " </GRD>."
                : "Yes, there are <GRD> two " + color_name(col) + " " +
                      std::string(plural(sh)) + " </GRD>.";
        c.turns.push_back(assistant_turn(reply, {make_span(targets, sup)}));
      } else {
        std::vector<std::vector<std::pair<int, Shape>>*> pools;
        for (auto* p : {&absent, &present, &doubled})
          if (!p->empty()) pools.push_back(p);
        auto& pool = *pools[rng.below(pools.size())];
        const auto [col, sh] = pool[rng.below(pool.size())];
        const std::string nouns = color_name(col) + " " + std::string(plural(sh));
        c.turns.push_back({Role::kUser, fill(pick(kCountTemplates, rng), nouns), {}, {}});
        std::vector<BinaryMask> targets;
        for (std::size_t i : entities_with(scene, col, sh)) targets.push_back(ents[i].mask);
        if (targets.empty()) {
          c.turns.push_back(assistant_turn("There are no " + nouns + ".", {}));
        } else if (targets.size() == 1) {
          c.turns.push_back(assistant_turn(
              "There is one <GRD> " + color_name(col) + " " + std::string(to_string(sh)) +
                  " </GRD>.",
              {make_span(targets, sup)}));
        } else {
          c.turns.push_back(assistant_turn("There are two <GRD> " + nouns + " </GRD>.",
                                           {make_span(targets, sup)}));
        }
      }
      break;
    }
    case Task::kRd: {
      need(!ents.empty() && !proposals.empty(), "RD needs an entity and proposals");
      const Entity& e = ents[rng.below(ents.size())];
      Pointer ptr;
      if (rng.bernoulli(options.p_mask_pointer)) {
        ptr = rng.bernoulli(0.5) ? e.mask
                                 : shift_mask(e.mask, rng.range(0, 2) - 1, rng.range(0, 2) - 1);
        if (std::get<BinaryMask>(ptr).empty()) ptr = e.mask;
      } else {
        ptr = mask_to_box(e.mask);
      }
      c.turns.push_back({Role::kUser, std::string(pick(kRdTemplates, rng)), {}, {ptr}});
      c.turns.push_back(
          assistant_turn("It is <GRD> " + full_expr(e) + " </GRD>.", {make_span({e.mask}, sup)}));
      break;
    }
  }
  return c;
}

Vocabulary corpus_vocabulary() {
  std::vector<std::string> words;
  auto add_text = [&](std::string_view text) {
    std::string t(text);
    for (auto pos = t.find("{}"); pos != std::string::npos; pos = t.find("{}"))
      t.replace(pos, 2, " ");
    for (auto& w : split_words(t)) words.push_back(std::move(w));
  };
  add_text("USER: ASSISTANT:");
  add_text(kSystemMessage);
  for (auto t : kGcapTemplates) add_text(t);
  for (auto t : kResTemplates) add_text(t);
  for (auto t : kPresenceTemplates) add_text(t);
  for (auto t : kCountTemplates) add_text(t);
  for (auto t : kRdTemplates) add_text(t);
  for (auto t : kResponseWords) add_text(t);
  for (auto c : kColorNames) add_text(c);
  for (Shape s : kAllShapes) {
    add_text(to_string(s));
    add_text(plural(s));
  }
  add_text(region_phrase(Region::kSky));
  add_text(region_phrase(Region::kGround));
  add_text("tip");
  return Vocabulary::from_words(words);
}

BalancedStream balance_sample(const std::map<std::string, std::size_t>& sizes,
                              const SamplerSpec& spec) {
  for (const auto& [src, r] : spec.ratios) {
    if (!(r > 0.0)) throw InvalidArgument("sampler ratio for '" + src + "' must be positive");
  }
  BalancedStream out;
  std::uint64_t stream = 0;
  for (const auto& [src, n] : sizes) {
    ++stream;
    const auto it = spec.ratios.find(src);
    const double ratio = it == spec.ratios.end() ? 1.0 : it->second;
    if (n == 0) {
      out.warnings.push_back("source '" + src + "' is empty; contributes nothing");
      out.contributed[src] = 0;
      continue;
    }
    const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    Rng rng(derive_seed(spec.seed, stream));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span(perm));
    for (std::size_t pass = 0; pass < target / n; ++pass)
      for (std::size_t i = 0; i < n; ++i) out.order.push_back({src, i});
    for (std::size_t i = 0; i < target % n; ++i) out.order.push_back({src, perm[i]});
    out.contributed[src] = target;
  }
  Rng rng(derive_seed(spec.seed, std::uint64_t{0}));
  rng.shuffle(std::span(out.order));
  return out;
}

namespace {

std::vector<EntitySpec> pair_specs(Rng& rng) {
  const int col = rng.range(0, kNumColors - 1);
  const Shape sh = kAllShapes[rng.below(3)];
  return {{col, sh, Region::kSky}, {col, sh, Region::kGround}};
}

GroundedConversation build_sample(Rng& rng, std::int64_t index, Task task,
                                  std::optional<ResKind> res_kind,
                                  std::optional<VqaKind> vqa_kind,
                                  const GenConfig& config) {
  SceneConfig sc;
  sc.n_entities = rng.range(std::max(1, config.min_entities),
                            std::max(config.min_entities, config.max_entities));
  sc.allow_parts = config.allow_parts;
  if ((res_kind == ResKind::kMulti) ||
      (vqa_kind == VqaKind::kCount && rng.bernoulli(1.0 / 3.0))) {
    sc.required = pair_specs(rng);
    sc.n_entities = std::max(sc.n_entities, 2);
  } else if (res_kind == ResKind::kPart) {
    sc.required = {{std::nullopt, Shape::kTriangle, std::nullopt}};
    sc.allow_parts = true;
  }
  const Scene scene = gen_scene(rng.next(), sc);
  const ProposalSet proposals = gen_proposals(scene, config.perturb, rng.next());
  TaskOptions opts;
  opts.supervision = rng.bernoulli(config.box_fraction) ? Supervision::kBox : Supervision::kMask;
  opts.res_kind = res_kind;
  opts.vqa_kind = vqa_kind;
  opts.p_mask_pointer = config.p_mask_pointer;
  GroundedConversation c = make_conversation(scene, proposals, task, rng.next(), opts);
  c.id = index;
  return c;
}

}  // namespace

GroundedConversation generate_sample(std::uint64_t seed, std::int64_t index,
                                     Task task, const GenConfig& config) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  std::optional<ResKind> res_kind;
  std::optional<VqaKind> vqa_kind;
  if (task == Task::kRes) {
    const double u = rng.uniform();
    if (u < config.p_multi) {
      res_kind = ResKind::kMulti;
    } else if (u < config.p_multi + config.p_negative) {
      res_kind = ResKind::kNegative;
    } else if (config.allow_parts && u < config.p_multi + config.p_negative + config.p_part) {
      res_kind = ResKind::kPart;
    } else {
      res_kind = ResKind::kSingle;
    }
  } else if (task == Task::kGvqa) {
    vqa_kind = rng.bernoulli(0.5) ? VqaKind::kPresence : VqaKind::kCount;
  }
  return build_sample(rng, index, task, res_kind, vqa_kind, config);
}

GroundedConversation generate_res_sample(std::uint64_t seed, std::int64_t index,
                                         ResKind kind, const GenConfig& config) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  return build_sample(rng, index, Task::kRes, kind, std::nullopt, config);
}

std::vector<GroundedConversation> generate_corpus(std::uint64_t seed, int n,
                                                  const GenConfig& config) {
  if (n < 0) throw InvalidArgument("corpus size must be >= 0");
  double total = 0.0;
  for (const auto& [t, p] : config.task_mix) {
    if (p < 0.0) throw InvalidArgument("task proportions must be >= 0");
    total += p;
  }
  if (!(total > 0.0)) throw InvalidArgument("task mix is empty");
  // Largest-remainder allocation so per-task counts sum to n exactly.
  std::vector<std::pair<Task, int>> counts;
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (const auto& [t, p] : config.task_mix) {
    const double exact = n * p / total;
    const int k = static_cast<int>(exact);
    counts.emplace_back(t, k);
    remainders.emplace_back(exact - k, counts.size() - 1);
    assigned += k;
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < n - assigned; ++i) ++counts[remainders[i].second].second;
  std::vector<Task> slots;
  for (const auto& [t, k] : counts) slots.insert(slots.end(), k, t);
  Rng rng(derive_seed(seed, SeedStream::kTaskSlots));
  rng.shuffle(std::span(slots));
  std::vector<GroundedConversation> out;
  out.reserve(slots.size());
  const std::uint64_t sample_seed = derive_seed(seed, SeedStream::kCorpus);
  for (int i = 0; i < n; ++i) out.push_back(generate_sample(sample_seed, i, slots[i], config));
  return out;
}

}  // namespace groundhog
