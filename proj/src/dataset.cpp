#include "svs/dataset.hpp"

#include <algorithm>

namespace svs {

SyntheticSequence::SyntheticSequence(SyntheticScene scene) : scene_(std::move(scene)) {
  for (const auto& f : scene_.frames) poses_.push_back(f.pose);
}

std::string SyntheticSequence::id() const { return "scene" + std::to_string(scene_.seed); }

const SyntheticFrame& SyntheticSequence::at(int frame) const {
  if (frame < 0 || frame >= size()) {
    throw DatasetError("frame " + std::to_string(frame) + " out of range for " + id());
  }
  return scene_.frames[static_cast<std::size_t>(frame)];
}

Tensor<float> SyntheticSequence::left(int frame) const { return at(frame).left; }
Tensor<float> SyntheticSequence::right(int frame) const { return at(frame).right; }
Tensor<float> SyntheticSequence::depth(int frame) const { return at(frame).depth; }

// ---------------------------------------------------------------------------

Dataset::Dataset(std::vector<std::shared_ptr<FrameSequence>> sequences)
    : sequences_(std::move(sequences)) {
  Index offset = 0;
  for (const auto& s : sequences_) {
    pair_offsets_.push_back(offset);
    offset += s->size();
  }
  pair_offsets_.push_back(offset);
}

Index Dataset::pair_count() const { return pair_offsets_.empty() ? 0 : pair_offsets_.back(); }

StereoPair Dataset::pair(Index i) const {
  if (i < 0 || i >= pair_count()) throw DatasetError("stereo pair index out of range");
  const auto it = std::upper_bound(pair_offsets_.begin(), pair_offsets_.end(), i);
  const auto s = static_cast<std::size_t>(it - pair_offsets_.begin() - 1);
  const int frame = static_cast<int>(i - pair_offsets_[s]);
  return {sequences_[s]->left(frame), sequences_[s]->right(frame)};
}

std::vector<WindowRef> Dataset::windows(int spacing) const {
  std::vector<WindowRef> out;
  for (std::size_t s = 0; s < sequences_.size(); ++s) {
    for (int t : eligible_targets(sequences_[s]->size(), spacing)) out.push_back({s, t});
  }
  return out;
}

ViewWindow Dataset::window(const WindowRef& ref, int spacing, bool with_depth) const {
  const FrameSequence& seq = *sequences_.at(ref.sequence);
  const SequenceSample sample = sample_window(seq.size(), seq.poses(), ref.target, spacing);
  ViewWindow w;
  w.label = seq.id() + ":" + std::to_string(ref.target);
  w.camera = seq.camera();
  w.target = seq.left(ref.target);
  w.offsets = sample.offsets;
  w.to_target = sample.reference_to_target;
  for (int f : sample.references) {
    w.left.push_back(seq.left(f));
    w.right.push_back(seq.right(f));
    if (with_depth) w.depth.push_back(seq.depth(f));
  }
  return w;
}

Dataset load_dataset(const DatasetSpec& spec) {
  std::vector<std::shared_ptr<FrameSequence>> seqs;
  if (spec.kind == DatasetKind::kSynthetic) {
    for (int i = 0; i < spec.scenes; ++i) {
      seqs.push_back(std::make_shared<SyntheticSequence>(
          generate_scene(spec.first_seed + static_cast<std::uint64_t>(i), spec.synthetic)));
    }
  } else {
    for (const auto& id : spec.sequences) {
      seqs.push_back(std::make_shared<KittiFrames>(load_kitti_sequence(spec.root, id, spec.crop)));
    }
  }
  return Dataset(std::move(seqs));
}

Index sample_index(std::uint64_t seed, long long iteration, int slot, Index count) {
  if (count <= 0) throw DatasetError("cannot sample from an empty dataset");
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(iteration) * 131 +
                    static_cast<std::uint64_t>(slot);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  x ^= x >> 31;
  return static_cast<Index>(x % static_cast<std::uint64_t>(count));
}

}  // namespace svs
