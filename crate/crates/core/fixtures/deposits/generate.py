"""Writes the Chassenon fixture deposits. Checksums come from sha256sum."""
import json
import os
import subprocess

HERE = os.path.dirname(os.path.abspath(__file__))
FIX = os.path.dirname(HERE)


def digest(path):
    out = subprocess.run(["sha256sum", path], check=True, capture_output=True, text=True).stdout
    return out.split()[0]


def doc(rel, role, cls, key):
    path = os.path.join(FIX, rel)
    return {
        "filename": os.path.basename(rel),
        "media_role": role,
        "byte_size": os.path.getsize(path),
        "checksum": digest(path),
        "format_class": cls,
        "storage": {"type": "internal", "key": key},
        "relations": [],
    }


cube = doc("ply/cube_ascii.ply", "final-model", "Archivable", "files/cube.ply")
cube["filename"] = "cube.ply"
report = doc("docs/report.pdf", "report", "Archivable", "files/report.pdf")
report["relations"] = [{"relation_kind": "documents", "target": "cube.ply"}]

deposit = {
    "local_id": 257350,
    "pid": None,
    "title": "Les thermes de Chassenon",
    "deposit_creator": {"name": "Archeovision", "role_note": None, "org": "UMS 3657"},
    "silent_partners": [{"name": "Département de la Charente", "role_note": None, "org": None}],
    "nature_of_resource": "3d-model",
    "nature_of_deposit": "restitution",
    "scientific_objectives": "Restitution of the Gallo-Roman baths of Cassinomagus from excavation data.",
    "deposit_date": "2015-11-20",
    "project_date_range": {"min": 2003, "max": 2015},
    "archaeological_date_range": {"min": 90, "max": 300},
    "period_terms": [{"scheme": "PeriodO", "uri": "http://n2t.net/ark:/99152/p0fr3d0025", "label": "Gallo-Roman"}],
    "place_terms": [{"scheme": "Geonames", "uri": "https://sws.geonames.org/9000001/", "label": "Chassenon"}],
    "subject_terms": [{"scheme": "PACTOLS", "uri": "https://ark.frantiq.fr/ark:/26678/pcrt3d0001", "label": "établissement thermal"}],
    "citation": "Archeovision 2015, Les thermes de Chassenon, National 3D Data Repository.",
    "related_publications": [],
    "objects": [{
        "local_id": 1,
        "pid": None,
        "title": "Les thermes de Chassenon",
        "creators": [{"name": "Archeovision", "role_note": None, "org": None}],
        "contributors": [{"name": "Cassinomagus excavation team", "role_note": None, "org": None}],
        "creation_3d_date": "2015-06-01",
        "archaeological_date": {"min": 90, "max": 300},
        "version": "1.0",
        "category": "mesh",
        "documents": [cube, report],
        "final_model": "cube.ply",
    }],
    "access_policy": "public",
    "status": "draft",
}

with open(os.path.join(HERE, "chassenon.json"), "w", encoding="utf-8") as f:
    json.dump(deposit, f, indent=2, ensure_ascii=False)
    f.write("\n")

deposit["pid"] = "10.34969/CND3D/257350.d.2015"
deposit["objects"][0]["pid"] = "10.34969/CND3D/1.o.2015"
deposit["status"] = "published"
with open(os.path.join(HERE, "chassenon_published.json"), "w", encoding="utf-8") as f:
    json.dump(deposit, f, indent=2, ensure_ascii=False)
    f.write("\n")
