#include <algorithm>
#include <memory>

#include "hpnet/data.hpp"
#include "hpnet/errors.hpp"
#include "hpnet/random.hpp"

namespace hpnet {

std::string_view movement_name(MovementClass m) {
  switch (m) {
    case MovementClass::HorizontalBounce: return "horizontal-bounce";
    case MovementClass::VerticalBounce: return "vertical-bounce";
    case MovementClass::Diagonal: return "diagonal";
    case MovementClass::Circular: return "circular";
    case MovementClass::Expanding: return "expanding";
    case MovementClass::StaticJitter: return "static-jitter";
  }
  return "?";
}

namespace {

struct Placement {
  int x, y, size;
};

// Reflects p into [0, hi] off both walls, flipping v on every bounce.
void bounce(int& p, int& v, int hi) {
  p += v;
  while (p < 0 || p > hi) {
    if (p < 0) p = -p;
    if (p > hi) p = 2 * hi - p;
    v = -v;
  }
}

bool covers(ShapeKind kind, int size, int r, int c) {
  switch (kind) {
    case ShapeKind::Square: return true;
    case ShapeKind::Cross: {
      const int bar = std::max(1, size / 3);
      const int lo = (size - bar) / 2, hi = lo + bar;
      return (r >= lo && r < hi) || (c >= lo && c < hi);
    }
    case ShapeKind::Disk: {
      // doubled coordinates keep the centre on the grid for even sizes
      const int dr = 2 * r - (size - 1), dc = 2 * c - (size - 1);
      return dr * dr + dc * dc <= size * size;
    }
  }
  return false;
}

void draw(Frame& f, ShapeKind kind, const Placement& p) {
  for (int r = 0; r < p.size; ++r)
    for (int c = 0; c < p.size; ++c)
      if (covers(kind, p.size, r, c)) {
        double& px = f.at(std::size_t(p.y + r), std::size_t(p.x + c));
        px = std::min(1.0, px + 1.0);
      }
}

int signed_speed(Rng& rng, int lo, int hi) {
  const int s = static_cast<int>(rng.range(lo, hi));
  return rng.below(2) ? s : -s;
}

// Trajectory generator for one object: returns its placement at frame t,
// advancing internal state one frame per call.
class Mover {
 public:
  virtual ~Mover() = default;
  virtual Placement next(Rng& rng) = 0;
};

class LinearBounce : public Mover {
 public:
  LinearBounce(Placement start, int vx, int vy, int w, int h)
      : p_(start), vx_(vx), vy_(vy), w_(w), h_(h) {}
  Placement next(Rng&) override {
    if (!started_) {
      started_ = true;
      return p_;
    }
    bounce(p_.x, vx_, w_ - p_.size);
    bounce(p_.y, vy_, h_ - p_.size);
    return p_;
  }

 private:
  Placement p_;
  int vx_, vy_, w_, h_;
  bool started_ = false;
};

class RectOrbit : public Mover {
 public:
  RectOrbit(int x0, int y0, int lx, int ly, int size, int u0, int step)
      : x0_(x0), y0_(y0), lx_(lx), ly_(ly), size_(size), u_(u0), step_(step) {}
  Placement next(Rng&) override {
    const int perim = 2 * (lx_ + ly_);
    Placement p{x0_, y0_, size_};
    if (perim > 0) {
      const int u = ((u_ % perim) + perim) % perim;
      if (u < lx_) {
        p.x += u;
      } else if (u < lx_ + ly_) {
        p.x += lx_, p.y += u - lx_;
      } else if (u < 2 * lx_ + ly_) {
        p.x += lx_ - (u - lx_ - ly_), p.y += ly_;
      } else {
        p.y += ly_ - (u - 2 * lx_ - ly_);
      }
    }
    u_ += step_;
    return p;
  }

 private:
  int x0_, y0_, lx_, ly_, size_, u_, step_;
};

class Breathing : public Mover {
 public:
  Breathing(int cx, int cy, int lo, int hi, int phase)
      : cx_(cx), cy_(cy), lo_(lo), hi_(hi), t_(phase) {}
  Placement next(Rng&) override {
    const int span = hi_ - lo_;
    int s = lo_;
    if (span > 0) {
      const int u = t_ % (2 * span);
      s = lo_ + (u <= span ? u : 2 * span - u);
    }
    ++t_;
    return {cx_ - s / 2, cy_ - s / 2, s};
  }

 private:
  int cx_, cy_, lo_, hi_, t_;
};

class Jitter : public Mover {
 public:
  Jitter(Placement base, int w, int h) : base_(base), w_(w), h_(h) {}
  Placement next(Rng& rng) override {
    Placement p = base_;
    p.x = std::clamp(p.x + static_cast<int>(rng.range(-1, 1)), 0, w_ - p.size);
    p.y = std::clamp(p.y + static_cast<int>(rng.range(-1, 1)), 0, h_ - p.size);
    return p;
  }

 private:
  Placement base_;
  int w_, h_;
};

struct Object {
  ShapeKind kind;
  std::unique_ptr<Mover> mover;
};

Object random_object(const SequenceSpec& spec, Rng& rng) {
  const int w = int(spec.width), h = int(spec.height);
  const auto kind = spec.shape_kinds[rng.below(spec.shape_kinds.size())];
  const int size = static_cast<int>(rng.range(spec.min_size, spec.max_size));
  const int x = static_cast<int>(rng.range(0, w - size));
  const int y = static_cast<int>(rng.range(0, h - size));
  const Placement start{x, y, size};
  switch (spec.movement) {
    case MovementClass::HorizontalBounce:
      return {kind, std::make_unique<LinearBounce>(
                        start, signed_speed(rng, spec.min_speed, spec.max_speed), 0, w, h)};
    case MovementClass::VerticalBounce:
      return {kind, std::make_unique<LinearBounce>(
                        start, 0, signed_speed(rng, spec.min_speed, spec.max_speed), w, h)};
    case MovementClass::Diagonal: {
      const int vx = signed_speed(rng, spec.min_speed, spec.max_speed);
      const int vy = signed_speed(rng, spec.min_speed, spec.max_speed);
      return {kind, std::make_unique<LinearBounce>(start, vx, vy, w, h)};
    }
    case MovementClass::Circular: {
      const int mx = (w - size) / 4, my = (h - size) / 4;
      const int x0 = static_cast<int>(rng.range(0, mx));
      const int y0 = static_cast<int>(rng.range(0, my));
      const int lx = w - size - 2 * x0, ly = h - size - 2 * y0;
      const int u0 = static_cast<int>(rng.range(0, std::max(0, 2 * (lx + ly) - 1)));
      const int step = signed_speed(rng, spec.min_speed, spec.max_speed);
      return {kind, std::make_unique<RectOrbit>(x0, y0, lx, ly, size, u0, step)};
    }
    case MovementClass::Expanding: {
      const int hi = spec.max_size, lo = spec.min_size;
      const int cx = static_cast<int>(rng.range(hi / 2, w - hi + hi / 2));
      const int cy = static_cast<int>(rng.range(hi / 2, h - hi + hi / 2));
      const int phase = static_cast<int>(rng.range(0, std::max(0, 2 * (hi - lo) - 1)));
      return {kind, std::make_unique<Breathing>(cx, cy, lo, hi, phase)};
    }
    case MovementClass::StaticJitter:
      return {kind, std::make_unique<Jitter>(start, w, h)};
  }
  throw ContractError("generate_sequence: unknown movement class");
}

}  // namespace

Sequence generate_sequence(const SequenceSpec& spec) {
  if (spec.height == 0 || spec.width == 0) throw ContractError("generate_sequence: empty frame");
  const int w = int(spec.width), h = int(spec.height);
  std::vector<Object> objects;
  if (!spec.objects.empty()) {
    for (const auto& o : spec.objects) {
      if (o.size < 1 || o.size > w || o.size > h) {
        throw ContractError("generate_sequence: object of size " + std::to_string(o.size) +
                            " does not fit a " + std::to_string(h) + "x" + std::to_string(w) +
                            " frame");
      }
      if (o.x < 0 || o.y < 0 || o.x + o.size > w || o.y + o.size > h) {
        throw ContractError("generate_sequence: object not fully inside the frame at t=0");
      }
      objects.push_back(
          {o.kind, std::make_unique<LinearBounce>(Placement{o.x, o.y, o.size}, o.vx, o.vy, w, h)});
    }
  } else if (spec.n_objects > 0) {
    if (spec.min_size < 1 || spec.min_size > spec.max_size) {
      throw ContractError("generate_sequence: invalid object size range");
    }
    if (spec.max_size > w || spec.max_size > h) {
      throw ContractError("generate_sequence: objects up to size " +
                          std::to_string(spec.max_size) + " do not fit a " + std::to_string(h) +
                          "x" + std::to_string(w) + " frame");
    }
    if (spec.min_speed < 1 || spec.min_speed > spec.max_speed) {
      throw ContractError("generate_sequence: speeds must satisfy 1 <= min <= max");
    }
    if (spec.shape_kinds.empty()) throw ContractError("generate_sequence: no shape kinds");
  }

  Rng rng(spec.seed);
  if (spec.objects.empty())
    for (std::size_t i = 0; i < spec.n_objects; ++i) objects.push_back(random_object(spec, rng));

  Sequence seq;
  seq.label = spec.movement;
  seq.frames.reserve(spec.n_frames);
  for (std::size_t t = 0; t < spec.n_frames; ++t) {
    Frame f(spec.height, spec.width);
    for (auto& o : objects) draw(f, o.kind, o.mover->next(rng));
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

SequenceSpec dataset_item_spec(const SequenceSpec& base, std::uint64_t master_seed,
                               std::size_t index, bool mixed) {
  SequenceSpec s = base;
  s.seed = derive_seed(master_seed, index);
  if (mixed) s.movement = static_cast<MovementClass>(index % kMovementClassCount);
  return s;
}

std::vector<Tensor> extract_blocks(const std::vector<Frame>& frames, std::size_t d,
                                   std::size_t stride) {
  if (d < 1 || stride < 1 || stride > d) {
    throw ContractError("extract_blocks: need 1 <= stride <= d");
  }
  if (d > frames.size()) {
    throw ContractError("extract_blocks: block depth " + std::to_string(d) + " exceeds " +
                        std::to_string(frames.size()) + " frames");
  }
  const std::size_t h = frames[0].height, w = frames[0].width;
  std::vector<Tensor> blocks;
  for (std::size_t start = 0; start + d <= frames.size(); start += stride) {
    std::vector<double> data;
    data.reserve(d * h * w);
    for (std::size_t t = start; t < start + d; ++t) {
      if (frames[t].height != h || frames[t].width != w) {
        throw DimensionError("extract_blocks: frames differ in size");
      }
      data.insert(data.end(), frames[t].pixels.begin(), frames[t].pixels.end());
    }
    blocks.push_back(Tensor::from_data({1, d, h, w}, std::move(data)));
  }
  return blocks;
}

Frame block_frame(const Tensor& block, std::size_t t) {
  if (block.rank() != 4 || t >= block.dim(1)) {
    throw DimensionError("block_frame: frame " + std::to_string(t) + " of " +
                         shape_str(block.shape()));
  }
  const std::size_t h = block.dim(2), w = block.dim(3);
  Frame f(h, w);
  auto src = block.data().subspan(t * h * w, h * w);
  std::copy(src.begin(), src.end(), f.pixels.begin());
  return f;
}

}  // namespace hpnet
