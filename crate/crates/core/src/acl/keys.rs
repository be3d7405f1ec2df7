use crate::crdt::{Bytes, CrdtType};
use crate::store::BoundObject;

use super::{AclError, UserId};

/// Prefix that turns a data bucket name into its policy bucket name.
pub const POLICY_BUCKET_PREFIX: &[u8] = b"acl$";

/// Application bucket names may not contain this byte.
pub const RESERVED_BUCKET_BYTE: u8 = b'$';

/// Location of the permission set of `user` on `object`.
///
/// The bucket is `acl$` followed by the data bucket name. The key is the
/// object key and the user id, each preceded by its length as a 4-byte
/// big-endian integer, so distinct (key, user) pairs never share a key.
pub fn policy_storage_key(object: &BoundObject, user: &UserId) -> BoundObject {
    let mut bucket = POLICY_BUCKET_PREFIX.to_vec();
    bucket.extend_from_slice(&object.bucket);
    let mut key = Vec::with_capacity(8 + object.key.len() + user.as_bytes().len());
    push_len_prefixed(&mut key, &object.key);
    push_len_prefixed(&mut key, user.as_bytes());
    BoundObject {
        bucket,
        key,
        crdt_type: CrdtType::Policy,
    }
}

fn push_len_prefixed(out: &mut Bytes, part: &[u8]) {
    let len = u32::try_from(part.len()).expect("key component longer than u32::MAX bytes");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(part);
}

pub fn is_policy_bucket(bucket: &[u8]) -> bool {
    bucket.starts_with(POLICY_BUCKET_PREFIX)
}

/// Rejects objects that may not be addressed as application data.
pub fn check_data_object(object: &BoundObject) -> Result<(), AclError> {
    if object.bucket.contains(&RESERVED_BUCKET_BYTE) {
        return Err(AclError::ReservedBucket(object.bucket.clone()));
    }
    if object.crdt_type == CrdtType::Policy {
        return Err(AclError::PolicyTypedData(object.clone()));
    }
    Ok(())
}
