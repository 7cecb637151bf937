"""Regenerates the binary workbook fixtures used by the tests."""
import os

from openpyxl import Workbook
from openpyxl.styles import numbers

HERE = os.path.dirname(os.path.abspath(__file__))


def two_sheets():
    wb = Workbook()
    s1 = wb.active
    s1.title = "Sales"
    s1.append(["Product", "Jan", "Feb"])
    s1.append(["Product A", 120, 80])
    s1.append(["Product B", 95, 110])
    s2 = wb.create_sheet("Staff")
    s2.append(["Name", "Dept"])
    s2.append(["Ann", "R&D"])
    s2.append(["Bob", "Ops"])
    wb.save(os.path.join(HERE, "two_sheets.xlsx"))


def merged_header():
    wb = Workbook()
    ws = wb.active
    ws.title = "Report"
    ws["A1"] = "Name"
    ws.merge_cells("A1:A2")
    ws["B1"] = "2024"
    ws.merge_cells("B1:C1")
    ws["B2"] = "Q1"
    ws["C2"] = "Q2"
    ws.append(["A", 3, 4])
    ws.append(["B", 5, 6])
    ws["A5"] = "Total"
    ws.merge_cells("A5:C5")
    ws["A6"] = "C"
    ws["B6"] = 0.25
    ws["B6"].number_format = numbers.FORMAT_PERCENTAGE
    ws["C6"] = 1234.5
    ws["C6"].number_format = "#,##0.00"
    wb.save(os.path.join(HERE, "merged_header.xlsx"))


if __name__ == "__main__":
    two_sheets()
    merged_header()
