#pragma once

#include <stdexcept>
#include <string>

namespace hshseg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HSHSEG_DEFINE_ERROR(Name)           \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

HSHSEG_DEFINE_ERROR(InvalidArgument);
HSHSEG_DEFINE_ERROR(ParseError);
HSHSEG_DEFINE_ERROR(MalformedGrid);
HSHSEG_DEFINE_ERROR(InvalidMergeList);
HSHSEG_DEFINE_ERROR(UnknownNode);
HSHSEG_DEFINE_ERROR(BoxOutOfBounds);
HSHSEG_DEFINE_ERROR(DimensionMismatch);
HSHSEG_DEFINE_ERROR(EmptyDataset);
HSHSEG_DEFINE_ERROR(MixedDimensions);
HSHSEG_DEFINE_ERROR(EmptyHierarchy);
HSHSEG_DEFINE_ERROR(MixedImages);
HSHSEG_DEFINE_ERROR(EmptyMask);
HSHSEG_DEFINE_ERROR(NoGroundTruth);

#undef HSHSEG_DEFINE_ERROR

/// Raised when no LSH bucket matches a query. Recoverable: callers may fall
/// back to an exhaustive scan.
class EmptyCandidates : public Error {
 public:
  EmptyCandidates() : Error("no candidate shares a bucket with the query") {}
};

}  // namespace hshseg
