//! Educational user level: student records, staff records, assignment
//! submissions and course materials. Every document and payload lives as an
//! object in the simulated data center; this module keeps only the indexes.

use std::collections::{BTreeMap, BTreeSet};

use bytes::Bytes;
use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_vec;
use crate::datacenter::{DataCenter, ObjectId, MIB};
use crate::domain::{
    Assignment, AssignmentId, CourseMaterial, Error, MaterialId, Result, StaffRecord, StudentPatch,
    StudentRecord, UserId,
};

pub const DEFAULT_MAX_PAYLOAD_BYTES: u64 = 32 * MIB;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentEntry {
    pub object_ref: ObjectId,
    pub version: u64,
}

/// Result of [`EduState::audit`]. Empty vectors mean indexes and the object
/// store agree exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub dangling: Vec<ObjectId>,
    pub leaked: Vec<ObjectId>,
    pub unreadable: Vec<UserId>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.dangling.is_empty() && self.leaked.is_empty() && self.unreadable.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EduState {
    students: BTreeMap<UserId, StudentEntry>,
    staff: BTreeMap<UserId, StaffRecord>,
    /// course -> owner -> submissions in submission order.
    submissions: BTreeMap<String, BTreeMap<UserId, Vec<Assignment>>>,
    materials: BTreeMap<MaterialId, CourseMaterial>,
    next_assignment: u64,
    next_material: u64,
}

impl EduState {
    pub fn new() -> Self {
        EduState {
            next_assignment: 1,
            next_material: 1,
            ..Default::default()
        }
    }

    fn id_taken(&self, id: &UserId) -> bool {
        self.students.contains_key(id) || self.staff.contains_key(id)
    }

    pub fn student_ids(&self) -> impl Iterator<Item = &UserId> {
        self.students.keys()
    }

    pub fn student_entry(&self, id: &UserId) -> Option<&StudentEntry> {
        self.students.get(id)
    }

    pub fn staff(&self, id: &UserId) -> Option<&StaffRecord> {
        self.staff.get(id)
    }

    pub fn check_staff_id_free(&self, id: &UserId) -> Result<()> {
        if self.id_taken(id) {
            return Err(Error::duplicate(format!("user id {id} already exists")));
        }
        Ok(())
    }

    pub fn add_staff(&mut self, record: StaffRecord) -> Result<()> {
        self.check_staff_id_free(&record.user_id)?;
        self.staff.insert(record.user_id.clone(), record);
        Ok(())
    }

    pub fn insert_student(&mut self, dc: &mut DataCenter, r: u8, record: &StudentRecord) -> Result<ObjectId> {
        if self.id_taken(&record.user_id) {
            return Err(Error::duplicate(format!(
                "user id {} already exists",
                record.user_id
            )));
        }
        let record = StudentRecord {
            version: 1,
            ..record.clone()
        };
        record.validate()?;
        let object = dc.put_object(Bytes::from(to_canonical_vec(&record)), r)?;
        self.students.insert(
            record.user_id.clone(),
            StudentEntry {
                object_ref: object.clone(),
                version: 1,
            },
        );
        Ok(object)
    }

    /// Reads the current version back from the object store.
    pub fn read_student(&self, dc: &DataCenter, id: &UserId) -> Result<StudentRecord> {
        let entry = self.students.get(id).ok_or_else(Error::no_user_found)?;
        let bytes = dc.get_object(&entry.object_ref)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::validation(format!("stored record for {id} is unreadable: {e}")))
    }

    /// Stores the patched record as a new object and drops the old one.
    /// Returns the new version.
    pub fn update_student(
        &mut self,
        dc: &mut DataCenter,
        r: u8,
        id: &UserId,
        patch: &StudentPatch,
    ) -> Result<(u64, ObjectId)> {
        if patch.is_empty() {
            return Err(Error::validation("patch changes nothing"));
        }
        let current = self.read_student(dc, id)?;
        let next = patch.apply_to(&current);
        next.validate()?;
        let old = self.students[id].object_ref.clone();
        let object = dc.put_object(Bytes::from(to_canonical_vec(&next)), r)?;
        dc.delete_object(&old)?;
        self.students.insert(
            id.clone(),
            StudentEntry {
                object_ref: object.clone(),
                version: next.version,
            },
        );
        Ok((next.version, object))
    }

    pub fn submit_assignment(
        &mut self,
        dc: &mut DataCenter,
        r: u8,
        owner: &UserId,
        course: &str,
        payload: Bytes,
        max_bytes: u64,
    ) -> Result<Assignment> {
        check_payload(&payload, max_bytes)?;
        let object = dc.put_object(payload.clone(), r)?;
        let assignment = Assignment {
            id: AssignmentId(format!("asg-{}", self.next_assignment)),
            course: course.to_owned(),
            owner: owner.clone(),
            object_ref: object,
            size_bytes: payload.len() as u64,
            submitted_at_tick: dc.tick(),
            grade: None,
        };
        self.next_assignment += 1;
        self.submissions
            .entry(course.to_owned())
            .or_default()
            .entry(owner.clone())
            .or_default()
            .push(assignment.clone());
        Ok(assignment)
    }

    /// All submissions for `course`, ordered by submission tick then id.
    pub fn list_submissions(&self, course: &str) -> Vec<Assignment> {
        let mut all: Vec<Assignment> = self
            .submissions
            .get(course)
            .into_iter()
            .flat_map(|by_owner| by_owner.values().flatten().cloned())
            .collect();
        all.sort_by_key(|a| (a.submitted_at_tick, assignment_seq(&a.id)));
        all
    }

    pub fn assignment(&self, id: &AssignmentId) -> Option<&Assignment> {
        self.submissions
            .values()
            .flat_map(|by_owner| by_owner.values().flatten())
            .find(|a| &a.id == id)
    }

    pub fn record_grade(&mut self, id: &AssignmentId, grade: &str) -> Result<()> {
        let len = grade.chars().count();
        if len == 0 || len > 32 {
            return Err(Error::validation("grade must be 1-32 characters"));
        }
        let assignment = self
            .submissions
            .values_mut()
            .flat_map(|by_owner| by_owner.values_mut().flatten())
            .find(|a| &a.id == id)
            .ok_or_else(|| Error::not_found(format!("unknown assignment {id}")))?;
        assignment.grade = Some(grade.to_owned());
        Ok(())
    }

    pub fn upload_material(
        &mut self,
        dc: &mut DataCenter,
        r: u8,
        uploader: &UserId,
        course: &str,
        payload: Bytes,
        max_bytes: u64,
    ) -> Result<CourseMaterial> {
        check_payload(&payload, max_bytes)?;
        let size = payload.len() as u64;
        let object = dc.put_object(payload, r)?;
        let material = CourseMaterial {
            id: MaterialId(format!("mat-{}", self.next_material)),
            course: course.to_owned(),
            uploader: uploader.clone(),
            object_ref: object,
            size_bytes: size,
        };
        self.next_material += 1;
        self.materials.insert(material.id.clone(), material.clone());
        Ok(material)
    }

    pub fn download_material(&self, dc: &DataCenter, course: &str, id: &MaterialId) -> Result<Bytes> {
        let material = self
            .materials
            .get(id)
            .filter(|m| m.course == course)
            .ok_or_else(|| Error::not_found(format!("no material {id} in course {course}")))?;
        dc.get_object(&material.object_ref)
    }

    fn referenced_objects(&self) -> BTreeSet<ObjectId> {
        let students = self.students.values().map(|e| e.object_ref.clone());
        let assignments = self
            .submissions
            .values()
            .flat_map(|by_owner| by_owner.values().flatten())
            .map(|a| a.object_ref.clone());
        let materials = self.materials.values().map(|m| m.object_ref.clone());
        students.chain(assignments).chain(materials).collect()
    }

    /// Compares every object reference held by the indexes with the live
    /// objects in `dc`, and checks each student document decodes to the
    /// indexed version.
    pub fn audit(&self, dc: &DataCenter) -> AuditReport {
        let referenced = self.referenced_objects();
        let live: BTreeSet<ObjectId> = dc.objects().map(|o| o.id.clone()).collect();
        let unreadable = self
            .students
            .iter()
            .filter(|(id, entry)| {
                !self
                    .read_student(dc, id)
                    .is_ok_and(|rec| rec.version == entry.version && &rec.user_id == *id)
            })
            .map(|(id, _)| id.clone())
            .collect();
        AuditReport {
            dangling: referenced.difference(&live).cloned().collect(),
            leaked: live.difference(&referenced).cloned().collect(),
            unreadable,
        }
    }
}

fn assignment_seq(id: &AssignmentId) -> u64 {
    id.0.strip_prefix("asg-")
        .and_then(|n| n.parse().ok())
        .unwrap_or(u64::MAX)
}

fn check_payload(payload: &Bytes, max_bytes: u64) -> Result<()> {
    if payload.is_empty() {
        return Err(Error::validation("payload must not be empty"));
    }
    if payload.len() as u64 > max_bytes {
        return Err(Error::validation(format!(
            "payload of {} bytes exceeds the {max_bytes}-byte limit",
            payload.len()
        )));
    }
    Ok(())
}
