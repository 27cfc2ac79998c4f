from delipy.cli import main

# Same as the installed `deli` command, for running from a checkout:
#   python mainCLI.py cluster doughnut.csv --alpha 12 -c 5

if __name__ == '__main__':
    main()
