#pragma once

#include <vector>

#include "mpl/ensembles.hpp"

namespace testutil {

inline mpl::EnsembleSpec spec_for(mpl::Symmetry s, mpl::EntryLaw law, mpl::Index n) {
    return mpl::EnsembleSpec{s, law, n};
}

template <class Scalar>
mpl::HermitianMatrix<Scalar> wigner(mpl::Index n, std::uint64_t seed, mpl::EntryLaw law = mpl::EntryLaw::gaussian) {
    auto rng = mpl::make_stream(seed, 0, mpl::Purpose::matrix);
    return mpl::sample_wigner<Scalar>({mpl::scalar_traits<Scalar>::symmetry, law, n}, rng);
}

}  // namespace testutil
