#pragma once

#include "mvc.hpp"
#include "splat_points.hpp"

namespace hairsim {

struct DeformResult {
    SplatSet splats;
    std::size_t degenerate = 0; // splats muted this frame
};

/// Cage-driven deformation of a rest hair set. Only the principal-axis end
/// rows are read per frame: the center and the minor-axis ends do not enter
/// the reconstruction.
class HairDeformer {
public:
    HairDeformer(SplatSet const& rest, MvcWeights const& weights) : rest_(&rest), weights_(&weights)
    {
        if (weights.n_splats() != rest.size())
            throw Error("deform_set: weights were baked for " + std::to_string(weights.n_splats()) +
                        " splats, hair has " + std::to_string(rest.size()));
        ends_.resize(rest.size());
        parallel_for(rest.size(), [&](std::size_t i) { ends_[i] = endpoints(rest.splats[i]); });
        for (std::size_t i = 0; i < rest.size(); ++i) {
            int const a = ends_[i].principal_axis;
            if (!weights.has_row(MvcWeights::row_index(i, positive_end(a))) ||
                !weights.has_row(MvcWeights::row_index(i, negative_end(a))))
                throw Error("deform_set: principal rows of splat " + std::to_string(i) + " were not baked");
        }
    }

    DeformResult deform(std::vector<Vec3> const& deformed_cage) const
    {
        CageSoA soa(deformed_cage);
        return deform(soa);
    }

    DeformResult deform(CageSoA const& cage) const
    {
        if (cage.size() != weights_->n_cage_verts())
            throw Error("deform_set: cage vertex count does not match weights");
        DeformResult out;
        deform_into(cage, out);
        return out;
    }

    /// Reuses `out` storage across frames.
    void deform_into(CageSoA const& cage, DeformResult& out) const
    {
        std::size_t const N = rest_->size();
        out.splats.frame = SplatFrame::Global;
        out.splats.splats.resize(N);
        std::vector<std::uint8_t> flags(N, 0);
        parallel_for(
            N,
            [&](std::size_t i) {
                int const a = ends_[i].principal_axis;
                Vec3 const pos = apply_row(weights_->row(MvcWeights::row_index(i, positive_end(a))), cage);
                Vec3 const neg = apply_row(weights_->row(MvcWeights::row_index(i, negative_end(a))), cage);
                auto r = reconstruct_from_axis(rest_->splats[i], ends_[i], pos, neg);
                flags[i] = r.degenerate;
                out.splats.splats[i] = std::move(r.splat);
            },
            64);
        out.degenerate = 0;
        for (auto f : flags)
            out.degenerate += f;
    }

    std::vector<SplatEndpoints> const& source_endpoints() const { return ends_; }

private:
    SplatSet const* rest_;
    MvcWeights const* weights_;
    std::vector<SplatEndpoints> ends_;
};

inline DeformResult deform_set(SplatSet const& hair, MvcWeights const& weights, std::vector<Vec3> const& deformed_cage)
{
    return HairDeformer(hair, weights).deform(deformed_cage);
}

} // namespace hairsim
